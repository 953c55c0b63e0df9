#include "pboost/learners.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "pboost/error.hpp"
#include "pboost/log.hpp"

namespace pboost {
namespace {

const char* const kModule = "baselearners";

// Bisection on log(lambda) for a decreasing df(lambda).
double bisect_log_lambda(const std::function<double(double)>& df, double target, double scale) {
  double lo = std::log(scale) - 30.0;
  double hi = std::log(scale) + 30.0;
  for (int i = 0; i < 20 && df(std::exp(lo)) < target; ++i) lo -= 20.0;
  for (int i = 0; i < 20 && df(std::exp(hi)) > target; ++i) hi += 20.0;
  for (int iter = 0; iter < 300; ++iter) {
    const double mid = 0.5 * (lo + hi);
    const double value = df(std::exp(mid));
    if (std::abs(value - target) < 1e-12 * std::max(1.0, target)) return std::exp(mid);
    if (value > target) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo < 1e-15) break;
  }
  return std::exp(0.5 * (lo + hi));
}

std::vector<double> numeric_column(const Dataset& ds, const std::string& name) {
  const Column& col = ds.column(name);
  if (!col.schema.is_numeric()) {
    throw ConfigError(kModule, "column '" + name + "' must be continuous");
  }
  if (col.missing_count() > 0) {
    throw DataError(kModule, "column '" + name + "' has missing values; complete cases required");
  }
  return col.values;
}

// Row codes of a categorical column mapped onto the learner's level list.
std::vector<std::size_t> level_codes(const Dataset& ds, const std::string& name,
                                     const std::vector<std::string>& levels) {
  const Column& col = ds.column(name);
  if (col.schema.kind != ColumnKind::categorical) {
    throw ConfigError(kModule, "column '" + name + "' must be categorical");
  }
  std::vector<std::ptrdiff_t> remap(col.schema.levels.size(), -1);
  for (std::size_t l = 0; l < col.schema.levels.size(); ++l) {
    const auto it = std::find(levels.begin(), levels.end(), col.schema.levels[l]);
    if (it != levels.end()) remap[l] = it - levels.begin();
  }
  std::vector<std::size_t> codes(ds.n_rows());
  for (std::size_t i = 0; i < ds.n_rows(); ++i) {
    if (col.is_missing(i)) {
      throw DataError(kModule, "column '" + name + "' has missing values; complete cases required");
    }
    const auto raw = static_cast<std::size_t>(col.values[i]);
    if (remap[raw] < 0) {
      throw DataError(kModule, "unseen level '" + col.schema.levels[raw] + "' in column '" +
                                   name + "'");
    }
    codes[i] = static_cast<std::size_t>(remap[raw]);
  }
  return codes;
}

std::vector<double> indicator_of(const Dataset& ds, const std::string& column,
                                 const std::string& level) {
  const Column& col = ds.column(column);
  if (col.schema.kind != ColumnKind::categorical) {
    throw ConfigError(kModule, "interaction modifier '" + column + "' must be categorical");
  }
  const auto& levels = col.schema.levels;
  const auto it = std::find(levels.begin(), levels.end(), level);
  const double code = it == levels.end() ? -1.0 : static_cast<double>(it - levels.begin());
  std::vector<double> z(ds.n_rows());
  for (std::size_t i = 0; i < ds.n_rows(); ++i) {
    if (col.is_missing(i)) {
      throw DataError(kModule, "column '" + column + "' has missing values; complete cases required");
    }
    z[i] = col.values[i] == code ? 1.0 : 0.0;
  }
  return z;
}

SparseMatrix dense_columns(const std::vector<std::vector<double>>& columns, std::size_t n) {
  std::vector<Eigen::Triplet<double>> triplets;
  for (std::size_t j = 0; j < columns.size(); ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      if (columns[j][i] != 0.0) {
        triplets.emplace_back(static_cast<int>(i), static_cast<int>(j), columns[j][i]);
      }
    }
  }
  SparseMatrix B(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(columns.size()));
  B.setFromTriplets(triplets.begin(), triplets.end());
  return B;
}

SparseMatrix indicators(const std::vector<std::ptrdiff_t>& column_of_row, Eigen::Index width) {
  std::vector<Eigen::Triplet<double>> triplets;
  for (std::size_t i = 0; i < column_of_row.size(); ++i) {
    if (column_of_row[i] >= 0) {
      triplets.emplace_back(static_cast<int>(i), static_cast<int>(column_of_row[i]), 1.0);
    }
  }
  SparseMatrix B(static_cast<Eigen::Index>(column_of_row.size()), width);
  B.setFromTriplets(triplets.begin(), triplets.end());
  return B;
}

std::string default_term_id(const TermSpec& t) {
  auto join = [&](const char* sep) {
    std::string out;
    for (std::size_t i = 0; i < t.columns.size(); ++i) out += (i ? sep : "") + t.columns[i];
    return out;
  };
  switch (t.type) {
    case TermType::linear: return join("+");
    case TermType::categorical: return join("");
    case TermType::smooth: return join("");
    case TermType::interaction: return join("") + ":" + t.by + "=" + t.by_level;
    case TermType::surface: return join("*");
    case TermType::spatial: return "spatial(" + join(",") + ")";
    case TermType::random: return "random(" + join("") + ")";
  }
  return join("_");
}

void require_columns(const TermSpec& t, std::size_t count) {
  if (t.columns.size() != count) {
    throw ConfigError(kModule, "term '" + t.id + "' of type " + to_string(t.type) + " needs " +
                                   std::to_string(count) + " column(s)");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Enum names

std::string to_string(LearnerKind kind) {
  switch (kind) {
    case LearnerKind::intercept: return "intercept";
    case LearnerKind::linear: return "linear";
    case LearnerKind::linear_categorical: return "linear-categorical";
    case LearnerKind::smooth_linear: return "smooth-decomposed-linear";
    case LearnerKind::smooth_nonlinear: return "smooth-decomposed-nonlinear";
    case LearnerKind::varying_coefficient: return "varying-coefficient";
    case LearnerKind::tensor_surface: return "tensor-surface";
    case LearnerKind::spatial_surface: return "spatial-surface";
    case LearnerKind::random_intercept: return "random-intercept";
  }
  return "linear";
}

LearnerKind learner_kind_from_string(const std::string& text) {
  for (auto kind : {LearnerKind::intercept, LearnerKind::linear, LearnerKind::linear_categorical,
                    LearnerKind::smooth_linear, LearnerKind::smooth_nonlinear,
                    LearnerKind::varying_coefficient, LearnerKind::tensor_surface,
                    LearnerKind::spatial_surface, LearnerKind::random_intercept}) {
    if (to_string(kind) == text) return kind;
  }
  throw ConfigError(kModule, "unknown learner kind '" + text + "'");
}

std::string to_string(LearnerPart part) {
  switch (part) {
    case LearnerPart::whole: return "whole";
    case LearnerPart::linear: return "linear";
    case LearnerPart::nonlinear: return "nonlinear";
  }
  return "whole";
}

LearnerPart learner_part_from_string(const std::string& text) {
  if (text == "whole") return LearnerPart::whole;
  if (text == "linear") return LearnerPart::linear;
  if (text == "nonlinear") return LearnerPart::nonlinear;
  throw ConfigError(kModule, "unknown learner part '" + text + "'");
}

std::string to_string(TermType type) {
  switch (type) {
    case TermType::linear: return "linear";
    case TermType::categorical: return "categorical";
    case TermType::smooth: return "smooth";
    case TermType::interaction: return "interaction";
    case TermType::surface: return "surface";
    case TermType::spatial: return "spatial";
    case TermType::random: return "random";
  }
  return "linear";
}

TermType term_type_from_string(const std::string& text) {
  for (auto type : {TermType::linear, TermType::categorical, TermType::smooth,
                    TermType::interaction, TermType::surface, TermType::spatial,
                    TermType::random}) {
    if (to_string(type) == text) return type;
  }
  throw ConfigError(kModule, "unknown term type '" + text + "'");
}

std::vector<std::string> LearnerSpec::column_levels() const {
  if (kind == LearnerKind::random_intercept) return levels;
  std::vector<std::string> out;
  if (kind == LearnerKind::linear_categorical) {
    for (std::size_t l = 0; l < levels.size(); ++l) {
      if (l != reference) out.push_back(levels[l]);
    }
  }
  return out;
}

const TermInfo& TermSet::term(const std::string& id) const {
  for (const auto& t : terms) {
    if (t.id == id) return t;
  }
  throw ConfigError(kModule, "unknown term '" + id + "'");
}

std::size_t TermSet::selectable_terms() const {
  return static_cast<std::size_t>(
      std::count_if(terms.begin(), terms.end(), [](const TermInfo& t) { return t.selectable; }));
}

// ---------------------------------------------------------------------------
// Term construction

TermSet build_term_set(const ModelFormula& formula, const Dataset& ds) {
  TermSet set;
  set.formula = formula;

  LearnerSpec intercept;
  intercept.id = "(Intercept)";
  intercept.term_id = "(Intercept)";
  intercept.label = "Intercept";
  intercept.kind = LearnerKind::intercept;
  set.learners.push_back(intercept);
  set.terms.push_back({"(Intercept)", "Intercept", TermType::linear, {}, "", "", {0}, false});

  std::set<std::string> ids{"(Intercept)"};
  for (TermSpec t : formula.terms) {
    if (t.type == TermType::interaction && t.by_level.empty() && ds.has_column(t.by)) {
      const ColumnSchema& by = ds.column(t.by).schema;
      if (by.kind == ColumnKind::categorical && by.levels.size() == 2) {
        t.by_level = by.levels[1 - by.reference_index()];
      }
    }
    if (t.id.empty()) t.id = default_term_id(t);
    if (t.label.empty()) t.label = t.id;
    if (!ids.insert(t.id).second) throw ConfigError(kModule, "duplicate term id '" + t.id + "'");
    for (const auto& c : t.columns) {
      if (!ds.has_column(c)) {
        throw ConfigError(kModule, "term '" + t.id + "' references unknown column '" + c + "'");
      }
    }
    const double df = t.df.value_or(formula.df);
    if (!(df > 0.0)) throw ConfigError(kModule, "term '" + t.id + "': df must be positive");

    TermInfo info{t.id, t.label, t.type, t.columns, t.by, t.by_level, {}, true};
    auto add = [&](LearnerSpec spec) {
      spec.term_id = t.id;
      spec.label = t.label;
      spec.df_target = df;
      info.learners.push_back(set.learners.size());
      set.learners.push_back(std::move(spec));
    };

    switch (t.type) {
      case TermType::linear: {
        if (t.columns.empty()) throw ConfigError(kModule, "linear term '" + t.id + "' has no columns");
        for (const auto& c : t.columns) numeric_column(ds, c);
        LearnerSpec spec;
        spec.id = t.id;
        spec.kind = LearnerKind::linear;
        spec.columns = t.columns;
        add(spec);
        break;
      }
      case TermType::categorical: {
        require_columns(t, 1);
        const Column& col = ds.column(t.columns[0]);
        if (col.schema.kind != ColumnKind::categorical) {
          throw ConfigError(kModule, "categorical term '" + t.id + "' needs a categorical column");
        }
        if (col.schema.levels.size() < 2) {
          throw ConfigError(kModule, "categorical term '" + t.id + "' needs at least two levels");
        }
        LearnerSpec spec;
        spec.id = t.id;
        spec.kind = LearnerKind::linear_categorical;
        spec.columns = t.columns;
        spec.levels = col.schema.levels;
        ColumnSchema sch = col.schema;
        if (!t.reference.empty()) sch.reference = t.reference;
        spec.reference = sch.reference_index();
        spec.penalized = spec.levels.size() - 1 > 2;
        spec.constraint = Constraint::constant;
        add(spec);
        break;
      }
      case TermType::smooth:
      case TermType::interaction: {
        require_columns(t, 1);
        const auto x = numeric_column(ds, t.columns[0]);
        const int inner = t.inner_knots.value_or(formula.inner_knots);
        const int degree = t.degree.value_or(formula.degree);
        if (degree < 1) throw ConfigError(kModule, "term '" + t.id + "': smooth degree must be >= 1");
        const bool vc = t.type == TermType::interaction;
        std::vector<double> range = x;
        if (vc) {
          if (t.by.empty() || !ds.has_column(t.by)) {
            throw ConfigError(kModule, "interaction '" + t.id + "' needs a modifier column");
          }
          const Column& by = ds.column(t.by);
          if (by.schema.kind != ColumnKind::categorical) {
            throw ConfigError(kModule, "interaction '" + t.id + "' has a continuous modifier '" +
                                           t.by + "'; only categorical modifiers are supported");
          }
          if (t.by_level.empty()) {
            if (by.schema.levels.size() != 2) {
              throw ConfigError(kModule, "interaction '" + t.id + "' must name by_level");
            }
            t.by_level = by.schema.levels[1 - by.schema.reference_index()];
            info.by_level = t.by_level;
          }
          const auto z = indicator_of(ds, t.by, t.by_level);
          range.clear();
          for (std::size_t i = 0; i < x.size(); ++i) {
            if (z[i] != 0.0) range.push_back(x[i]);
          }
        }
        const KnotGrid grid = KnotGrid::over(range, inner, degree);
        const PenaltyMatrix K = difference_penalty(grid.n_basis(), 2);

        LearnerSpec lin;
        lin.id = t.id + ".linear";
        lin.kind = vc ? LearnerKind::varying_coefficient : LearnerKind::smooth_linear;
        lin.part = LearnerPart::linear;
        lin.columns = t.columns;
        lin.by_column = vc ? t.by : "";
        lin.by_level = vc ? t.by_level : "";
        lin.constraint = Constraint::constant;
        add(lin);

        LearnerSpec nl = lin;
        nl.id = t.id + ".nonlinear";
        nl.kind = vc ? LearnerKind::varying_coefficient : LearnerKind::smooth_nonlinear;
        nl.part = LearnerPart::nonlinear;
        nl.grids = {grid};
        nl.transform = penalized_subspace(K.K);
        nl.constraint = Constraint::constant_linear;
        nl.penalized = true;
        add(nl);
        break;
      }
      case TermType::surface:
      case TermType::spatial: {
        require_columns(t, 2);
        const int inner = t.inner_knots.value_or(formula.surface_inner_knots);
        const int degree = t.degree.value_or(formula.surface_degree);
        const KnotGrid g1 = KnotGrid::over(numeric_column(ds, t.columns[0]), inner, degree);
        const KnotGrid g2 = KnotGrid::over(numeric_column(ds, t.columns[1]), inner, degree);
        LearnerSpec spec;
        spec.id = t.id;
        spec.kind = t.type == TermType::spatial ? LearnerKind::spatial_surface
                                                : LearnerKind::tensor_surface;
        spec.columns = t.columns;
        spec.grids = {g1, g2};
        spec.transform = penalized_subspace(kronecker_sum_penalty(g1.n_basis(), g2.n_basis(), 1).K);
        spec.constraint = Constraint::constant;
        spec.penalized = true;
        add(spec);
        break;
      }
      case TermType::random: {
        require_columns(t, 1);
        const Column& col = ds.column(t.columns[0]);
        if (col.schema.kind != ColumnKind::categorical) {
          throw ConfigError(kModule, "random intercept '" + t.id + "' needs a categorical column");
        }
        LearnerSpec spec;
        spec.id = t.id;
        spec.kind = LearnerKind::random_intercept;
        spec.columns = t.columns;
        spec.levels = col.schema.levels;
        spec.penalized = true;
        add(spec);
        break;
      }
    }
    set.terms.push_back(std::move(info));
  }
  return set;
}

// ---------------------------------------------------------------------------
// Frames

LearnerFrame make_frame(const LearnerSpec& spec, const Dataset& ds) {
  const std::size_t n = ds.n_rows();
  LearnerFrame frame;
  std::vector<double> scale;
  if (!spec.by_column.empty()) scale = indicator_of(ds, spec.by_column, spec.by_level);

  switch (spec.kind) {
    case LearnerKind::intercept:
      frame.basis = dense_columns({std::vector<double>(n, 1.0)}, n);
      break;
    case LearnerKind::linear: {
      std::vector<std::vector<double>> cols;
      for (const auto& c : spec.columns) cols.push_back(numeric_column(ds, c));
      frame.basis = dense_columns(cols, n);
      break;
    }
    case LearnerKind::linear_categorical:
    case LearnerKind::random_intercept: {
      const auto codes = level_codes(ds, spec.columns[0], spec.levels);
      const bool dummy = spec.kind == LearnerKind::linear_categorical;
      std::vector<std::ptrdiff_t> column_of(n);
      for (std::size_t i = 0; i < n; ++i) {
        const auto c = static_cast<std::ptrdiff_t>(codes[i]);
        const auto ref = static_cast<std::ptrdiff_t>(spec.reference);
        column_of[i] = !dummy ? c : (c == ref ? -1 : (c < ref ? c : c - 1));
      }
      const auto width = static_cast<Eigen::Index>(spec.levels.size() - (dummy ? 1 : 0));
      frame.basis = indicators(column_of, width);
      break;
    }
    case LearnerKind::smooth_linear:
    case LearnerKind::smooth_nonlinear:
    case LearnerKind::varying_coefficient: {
      auto x = numeric_column(ds, spec.columns[0]);
      if (spec.part == LearnerPart::linear) {
        if (!scale.empty()) {
          for (std::size_t i = 0; i < n; ++i) x[i] *= scale[i];
        }
        frame.basis = dense_columns({x}, n);
      } else {
        if (!scale.empty()) {
          // Rows outside the modifier level are zeroed below; keep them inside
          // the knot range so they do not count as clamped.
          for (std::size_t i = 0; i < n; ++i) {
            if (scale[i] == 0.0) x[i] = spec.grids[0].lo;
          }
        }
        frame.basis = bspline_basis(x, spec.grids[0]);
        if (!scale.empty()) {
          const Eigen::Map<const Eigen::VectorXd> z(scale.data(), static_cast<Eigen::Index>(n));
          frame.basis = SparseMatrix(z.asDiagonal() * frame.basis).pruned();
        }
      }
      break;
    }
    case LearnerKind::tensor_surface:
    case LearnerKind::spatial_surface:
      frame.basis = row_kronecker(bspline_basis(numeric_column(ds, spec.columns[0]), spec.grids[0]),
                                  bspline_basis(numeric_column(ds, spec.columns[1]), spec.grids[1]));
      break;
  }

  if (spec.constraint != Constraint::none) {
    const Eigen::Index c = spec.constraint == Constraint::constant ? 1 : 2;
    frame.constraints.resize(static_cast<Eigen::Index>(n), c);
    frame.constraints.col(0).setOnes();
    if (c == 2) {
      const auto x = numeric_column(ds, spec.columns[0]);
      for (std::size_t i = 0; i < n; ++i) frame.constraints(static_cast<Eigen::Index>(i), 1) = x[i];
    }
    if (!scale.empty()) {
      for (std::size_t i = 0; i < n; ++i) frame.constraints.row(static_cast<Eigen::Index>(i)) *= scale[i];
    }
  }
  return frame;
}

std::vector<LearnerFrame> make_frames(const TermSet& terms, const Dataset& ds) {
  std::vector<LearnerFrame> frames;
  frames.reserve(terms.learners.size());
  for (const auto& spec : terms.learners) frames.push_back(make_frame(spec, ds));
  return frames;
}

Eigen::MatrixXd constraint_projection(const LearnerSpec& spec, const LearnerFrame& frame,
                                      std::span<const double> w) {
  const Eigen::Index r = spec.transform.size() ? spec.transform.cols() : frame.basis.cols();
  if (spec.constraint == Constraint::none) return Eigen::MatrixXd(0, r);
  const Eigen::Map<const Eigen::VectorXd> wv(w.data(), static_cast<Eigen::Index>(w.size()));
  const Eigen::MatrixXd wc = wv.asDiagonal() * frame.constraints;
  const Eigen::MatrixXd ctwc = frame.constraints.transpose() * wc;
  Eigen::MatrixXd h = frame.basis.transpose() * wc;  // m x c
  if (spec.transform.size()) h = spec.transform.transpose() * h;
  return ctwc.completeOrthogonalDecomposition().solve(h.transpose());
}

Eigen::VectorXd apply_design(const LearnerSpec& spec, const LearnerFrame& frame,
                             const Eigen::MatrixXd& projection, const Eigen::VectorXd& beta) {
  Eigen::VectorXd out = spec.transform.size() ? Eigen::VectorXd(frame.basis * (spec.transform * beta))
                                              : Eigen::VectorXd(frame.basis * beta);
  if (spec.constraint != Constraint::none) out -= frame.constraints * (projection * beta);
  return out;
}

Eigen::MatrixXd effective_design(const LearnerSpec& spec, const LearnerFrame& frame,
                                 const Eigen::MatrixXd& projection) {
  Eigen::MatrixXd X = spec.transform.size() ? Eigen::MatrixXd(frame.basis * spec.transform)
                                            : Eigen::MatrixXd(frame.basis);
  if (spec.constraint != Constraint::none) X -= frame.constraints * projection;
  return X;
}

// ---------------------------------------------------------------------------
// Reference path

FitResult fit_penalized_ls(const BaseLearner& bl, std::span<const double> u,
                           std::span<const double> w) {
  const Eigen::MatrixXd& X = bl.design;
  const auto n = X.rows();
  if (static_cast<Eigen::Index>(u.size()) != n || static_cast<Eigen::Index>(w.size()) != n) {
    throw DataError(kModule, "fit_penalized_ls: dimension mismatch for learner '" + bl.id + "'");
  }
  const Eigen::Map<const Eigen::VectorXd> uv(u.data(), n);
  const Eigen::Map<const Eigen::VectorXd> wv(w.data(), n);
  Eigen::MatrixXd A = X.transpose() * wv.asDiagonal() * X;
  if (bl.penalty.size() && bl.lambda > 0.0) A += bl.lambda * bl.penalty;
  const Eigen::VectorXd rhs = X.transpose() * wv.cwiseProduct(uv);

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  qr.setThreshold(1e-12);
  if (qr.rank() < A.cols()) {
    throw NumericalError(kModule, "singular penalized system for learner '" + bl.id + "'");
  }
  FitResult out;
  out.coefficients = qr.solve(rhs);
  out.fitted = X * out.coefficients;
  out.weighted_rss = (uv - out.fitted).array().square().matrix().dot(wv);
  return out;
}

double hat_trace_df(const BaseLearner& bl, double lambda, std::span<const double> w) {
  const Eigen::MatrixXd& X = bl.design;
  const Eigen::Map<const Eigen::VectorXd> wv(w.data(), X.rows());
  const Eigen::MatrixXd F = X.transpose() * wv.asDiagonal() * X;
  Eigen::MatrixXd A = F;
  if (bl.penalty.size() && lambda > 0.0) A += lambda * bl.penalty;
  return A.completeOrthogonalDecomposition().solve(F).trace();
}

double calibrate_lambda_for_df(const BaseLearner& bl, double df_target,
                               std::span<const double> w) {
  const double max_df = hat_trace_df(bl, 0.0, w);
  if (bl.penalty.size() == 0) {
    if (std::abs(df_target - max_df) < 1e-9) return 0.0;
    throw DataError(kModule, "learner '" + bl.id + "' is unpenalized; attainable df is exactly " +
                                 std::to_string(max_df));
  }
  const Eigen::Map<const Eigen::VectorXd> wv(w.data(), bl.design.rows());
  const Eigen::MatrixXd F = bl.design.transpose() * wv.asDiagonal() * bl.design;
  const double scale = std::max(F.trace() / std::max(bl.penalty.trace(), 1e-300), 1e-300);
  const double min_df = hat_trace_df(bl, scale * 1e12, w);
  const double floor_df = std::round(min_df);
  if (df_target > max_df + 1e-9 || df_target <= floor_df + 1e-9) {
    throw DataError(kModule, "df_target " + std::to_string(df_target) + " for learner '" + bl.id +
                                 "' outside attainable range (" + std::to_string(floor_df) + ", " +
                                 std::to_string(max_df) + "]");
  }
  if (df_target > max_df - 1e-9) return 0.0;
  return bisect_log_lambda([&](double lambda) { return hat_trace_df(bl, lambda, w); }, df_target,
                           scale);
}

// ---------------------------------------------------------------------------
// Prepared learners

PreparedLearner::PreparedLearner(const LearnerSpec& spec, const LearnerFrame& frame,
                                 std::span<const double> w)
    : spec_(&spec), frame_(&frame) {
  const auto n = frame.basis.rows();
  if (static_cast<Eigen::Index>(w.size()) != n) {
    throw DataError(kModule, "weights do not match rows for learner '" + spec.id + "'");
  }
  const Eigen::Map<const Eigen::VectorXd> wv(w.data(), n);
  projection_ = constraint_projection(spec, frame, w);

  const SparseMatrix weighted = wv.asDiagonal() * frame.basis;
  const SparseMatrix G = frame.basis.transpose() * weighted;

  bool diagonal = spec.transform.size() == 0 && spec.constraint == Constraint::none;
  if (diagonal) {
    for (Eigen::Index k = 0; k < G.outerSize() && diagonal; ++k) {
      for (SparseMatrix::InnerIterator it(G, k); it; ++it) {
        if (it.row() != it.col() && it.value() != 0.0) {
          diagonal = false;
          break;
        }
      }
    }
  }

  if (diagonal) {
    eigenvalues_ = Eigen::VectorXd(G.diagonal());
  } else {
    Eigen::MatrixXd F = spec.transform.size()
                            ? Eigen::MatrixXd(spec.transform.transpose() * (G * spec.transform))
                            : Eigen::MatrixXd(G);
    if (spec.constraint != Constraint::none) {
      const Eigen::MatrixXd wc = wv.asDiagonal() * frame.constraints;
      Eigen::MatrixXd h = frame.basis.transpose() * wc;
      if (spec.transform.size()) h = spec.transform.transpose() * h;
      const Eigen::MatrixXd ctwc = frame.constraints.transpose() * wc;
      const Eigen::MatrixXd cross = h * projection_;
      F += -cross - cross.transpose() + projection_.transpose() * ctwc * projection_;
    }
    F = 0.5 * (F + F.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(F);
    if (eig.info() != Eigen::Success) {
      throw NumericalError(kModule, "eigendecomposition failed for learner '" + spec.id + "'");
    }
    eigenvalues_ = eig.eigenvalues();
    eigenvectors_ = eig.eigenvectors();
  }
  eigenvalues_ = eigenvalues_.cwiseMax(0.0);
  tolerance_ = 1e-10 * eigenvalues_.maxCoeff();

  if (spec.penalized) {
    const int r = rank();
    if (r == 0) {
      log::warn(kModule, "learner '" + spec.id + "' has no weighted data; it cannot be selected");
      lambda_ = 0.0;
    } else if (spec.df_target > r + 1e-9) {
      throw DataError(kModule, "df_target " + std::to_string(spec.df_target) + " for learner '" +
                                   spec.id + "' outside attainable range (0, " +
                                   std::to_string(r) + "]");
    } else if (spec.df_target > r - 1e-9) {
      lambda_ = 0.0;
    } else {
      lambda_ = bisect_log_lambda([this](double l) { return df(l); }, spec.df_target,
                                  eigenvalues_.maxCoeff());
    }
  }
}

int PreparedLearner::rank() const {
  return static_cast<int>((eigenvalues_.array() > tolerance_).count());
}

double PreparedLearner::df(double lambda) const {
  double total = 0.0;
  for (Eigen::Index i = 0; i < eigenvalues_.size(); ++i) {
    const double mu = eigenvalues_(i);
    if (mu > tolerance_) total += mu / (mu + lambda);
  }
  return total;
}

Eigen::VectorXd PreparedLearner::crossprod(const Eigen::VectorXd& v) const {
  Eigen::VectorXd r = frame_->basis.transpose() * v;
  if (spec_->transform.size()) r = spec_->transform.transpose() * r;
  if (spec_->constraint != Constraint::none) {
    r -= projection_.transpose() * (frame_->constraints.transpose() * v);
  }
  return r;
}

Eigen::VectorXd PreparedLearner::apply(const Eigen::VectorXd& beta) const {
  return apply_design(*spec_, *frame_, projection_, beta);
}

Eigen::VectorXd PreparedLearner::eigen_coefficients(const Eigen::VectorXd& s) const {
  Eigen::VectorXd g(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    const double mu = eigenvalues_(i);
    g(i) = (mu > tolerance_) ? s(i) / (mu + lambda_) : 0.0;
  }
  return g;
}

double PreparedLearner::rss(const Eigen::VectorXd& wu, double wuu) const {
  const Eigen::VectorXd r = crossprod(wu);
  const Eigen::VectorXd s = eigenvectors_.size() ? Eigen::VectorXd(eigenvectors_.transpose() * r) : r;
  const Eigen::VectorXd g = eigen_coefficients(s);
  double reduction = 0.0;
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    reduction += g(i) * (2.0 * s(i) - eigenvalues_(i) * g(i));
  }
  return wuu - reduction;
}

PreparedLearner::Update PreparedLearner::fit(const Eigen::VectorXd& wu, double wuu) const {
  const Eigen::VectorXd r = crossprod(wu);
  const Eigen::VectorXd s = eigenvectors_.size() ? Eigen::VectorXd(eigenvectors_.transpose() * r) : r;
  const Eigen::VectorXd g = eigen_coefficients(s);
  double reduction = 0.0;
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    reduction += g(i) * (2.0 * s(i) - eigenvalues_(i) * g(i));
  }
  Update out;
  out.coefficients = eigenvectors_.size() ? Eigen::VectorXd(eigenvectors_ * g) : g;
  out.weighted_rss = wuu - reduction;
  return out;
}

BaseLearner PreparedLearner::materialize() const {
  BaseLearner bl;
  bl.id = spec_->id;
  bl.kind = spec_->kind;
  bl.design = effective_design(*spec_, *frame_, projection_);
  if (spec_->penalized) bl.penalty = Eigen::MatrixXd::Identity(bl.design.cols(), bl.design.cols());
  bl.lambda = lambda_;
  bl.df_target = spec_->df_target;
  bl.term_label = spec_->label;
  return bl;
}

std::vector<PreparedLearner> prepare_learners(const TermSet& terms,
                                              const std::vector<LearnerFrame>& frames,
                                              std::span<const double> w) {
  std::vector<PreparedLearner> out;
  out.reserve(terms.learners.size());
  for (std::size_t j = 0; j < terms.learners.size(); ++j) {
    out.emplace_back(terms.learners[j], frames[j], w);
  }
  return out;
}

}  // namespace pboost
