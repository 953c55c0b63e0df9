#include "pboost/engine.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "pboost/error.hpp"
#include "pboost/json_io.hpp"
#include "pboost/log.hpp"
#include "pboost/probit.hpp"

namespace pboost {
namespace {

const char* const kModule = "boost-engine";

using Json = nlohmann::json;

Eigen::Map<const Eigen::VectorXd> as_vector(std::span<const double> v) {
  return {v.data(), static_cast<Eigen::Index>(v.size())};
}

void check_lengths(std::size_t n, std::span<const double> y, std::span<const double> w) {
  if (y.size() != n || w.size() != n) throw DataError(kModule, "outcome/weights do not match rows");
}

std::size_t pick_minimum(const std::vector<double>& rss, const std::vector<std::string>& ids) {
  std::size_t best = rss.size();
  std::size_t skipped = 0;
  for (std::size_t j = 0; j < rss.size(); ++j) {
    if (!std::isfinite(rss[j])) {
      ++skipped;
      log::warn(kModule, "learner '" + ids[j] + "' produced a non-finite fit; skipped");
      continue;
    }
    if (best == rss.size() || rss[j] < rss[best]) best = j;
  }
  if (best == rss.size()) {
    throw NumericalError(kModule, "no learner produced a finite fit (" + std::to_string(skipped) +
                                      " skipped)");
  }
  return best;
}

Eigen::VectorXd eta_from_frames(const FittedModel& model, std::span<const LearnerFrame> frames,
                                std::size_t n) {
  Eigen::VectorXd eta = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), model.offset);
  const auto& specs = model.terms->learners;
  for (std::size_t j = 0; j < specs.size(); ++j) {
    if (model.coefficients[j].isZero(0.0)) continue;
    eta += apply_design(specs[j], frames[j], model.projections[j], model.coefficients[j]);
  }
  return eta;
}

const TermInfo& find_term(const FittedModel& model, const std::string& term_id) {
  for (const auto& t : model.terms->terms) {
    if (t.id == term_id) return t;
  }
  throw ConfigError(kModule, "unknown term '" + term_id + "'");
}

double clamp_count(double x, const KnotGrid& g, std::size_t& clamped) {
  if (x < g.lo || x > g.hi) {
    ++clamped;
    return std::clamp(x, g.lo, g.hi);
  }
  return x;
}

Column numeric(const std::string& name, std::vector<double> values) {
  Column c;
  c.schema.name = name;
  c.schema.kind = ColumnKind::continuous;
  c.values = std::move(values);
  return c;
}

std::string constraint_name(Constraint c) {
  switch (c) {
    case Constraint::none: return "none";
    case Constraint::constant: return "constant";
    case Constraint::constant_linear: return "constant_linear";
  }
  return "none";
}

Constraint constraint_from_name(const std::string& s) {
  if (s == "none") return Constraint::none;
  if (s == "constant") return Constraint::constant;
  if (s == "constant_linear") return Constraint::constant_linear;
  throw DataError(kModule, "model file: unknown constraint '" + s + "'");
}

Json vector_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd vector_from(const Json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

// ---------------------------------------------------------------------------
// Steps

BoostState initial_state(std::span<const PreparedLearner> learners, std::span<const double> y,
                         std::span<const double> w, double nu) {
  BoostState state;
  state.nu = nu;
  state.offset = offset_init(y, w);
  state.eta = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(y.size()), state.offset);
  for (const auto& l : learners) state.coefficients.push_back(Eigen::VectorXd::Zero(l.width()));
  return state;
}

BoostState initial_state(std::span<const BaseLearner> learners, std::span<const double> y,
                         std::span<const double> w, double nu) {
  BoostState state;
  state.nu = nu;
  state.offset = offset_init(y, w);
  state.eta = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(y.size()), state.offset);
  for (const auto& l : learners) state.coefficients.push_back(Eigen::VectorXd::Zero(l.design.cols()));
  return state;
}

void boost_step(BoostState& state, std::span<const PreparedLearner> learners,
                std::span<const double> y, std::span<const double> w, Execution execution) {
  const auto n = static_cast<std::size_t>(state.eta.size());
  check_lengths(n, y, w);
  if (learners.empty()) throw ConfigError(kModule, "no base learners");

  const auto u = negative_gradient(y, std::span<const double>(state.eta.data(), n));
  const Eigen::VectorXd wu = as_vector(w).cwiseProduct(as_vector(u));
  const double wuu = wu.dot(as_vector(u));

  const auto count = static_cast<std::ptrdiff_t>(learners.size());
  std::vector<double> rss(learners.size());
  if (execution == Execution::parallel) {
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t j = 0; j < count; ++j) rss[static_cast<std::size_t>(j)] = learners[j].rss(wu, wuu);
  } else {
    for (std::ptrdiff_t j = 0; j < count; ++j) rss[static_cast<std::size_t>(j)] = learners[j].rss(wu, wuu);
  }

  std::vector<std::string> ids;
  if (std::any_of(rss.begin(), rss.end(), [](double v) { return !std::isfinite(v); })) {
    for (const auto& l : learners) ids.push_back(l.spec().id);
  }
  const std::size_t best = pick_minimum(rss, ids);

  const auto update = learners[best].fit(wu, wuu);
  state.coefficients[best] += state.nu * update.coefficients;
  state.eta += learners[best].apply(state.nu * update.coefficients);
  ++state.iteration;
  state.history.push_back({state.iteration, best, update.weighted_rss});
}

namespace reference {

void boost_step(BoostState& state, std::span<const BaseLearner> learners,
                std::span<const double> y, std::span<const double> w) {
  const auto n = static_cast<std::size_t>(state.eta.size());
  check_lengths(n, y, w);
  const auto u = negative_gradient(y, std::span<const double>(state.eta.data(), n));

  std::vector<FitResult> fits(learners.size());
  std::vector<double> rss(learners.size());
  std::vector<std::string> ids;
  for (std::size_t j = 0; j < learners.size(); ++j) {
    ids.push_back(learners[j].id);
    try {
      fits[j] = fit_penalized_ls(learners[j], u, w);
      rss[j] = fits[j].weighted_rss;
    } catch (const NumericalError&) {
      rss[j] = std::numeric_limits<double>::quiet_NaN();
    }
  }
  const std::size_t best = pick_minimum(rss, ids);
  state.coefficients[best] += state.nu * fits[best].coefficients;
  state.eta += state.nu * fits[best].fitted;
  ++state.iteration;
  state.history.push_back({state.iteration, best, fits[best].weighted_rss});
}

}  // namespace reference

// ---------------------------------------------------------------------------
// Booster

bool FittedModel::term_selected(const std::string& term_id) const {
  const auto& info = find_term(*this, term_id);
  return std::any_of(info.learners.begin(), info.learners.end(),
                     [&](std::size_t j) { return !coefficients[j].isZero(0.0); });
}

ModelData make_model_data(const TermSet& terms, const Dataset& ds, std::vector<double> y) {
  if (y.size() != ds.n_rows()) throw DataError(kModule, "outcome length does not match rows");
  ModelData data;
  data.terms = std::make_shared<const TermSet>(terms);
  data.frames = std::make_shared<const std::vector<LearnerFrame>>(make_frames(terms, ds));
  data.y = std::move(y);
  data.weights = ds.weights();
  return data;
}

Booster::Booster(const ModelData& data, std::vector<double> weights, BoostOptions options)
    : data_(data), weights_(std::move(weights)), options_(options) {
  if (weights_.size() != data_.n_rows()) throw DataError(kModule, "weights do not match rows");
  if (!(options_.nu > 0.0 && options_.nu <= 1.0)) {
    throw ConfigError(kModule, "step length nu must be in (0, 1]");
  }
  double total = 0.0;
  std::size_t positive = 0;
  for (double v : weights_) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw DataError(kModule, "weights must be finite and >= 0");
    if (v > 0.0) {
      total += v;
      ++positive;
    }
  }
  if (positive == 0) throw DataError(kModule, "all weights are zero");
  const double mean = total / static_cast<double>(positive);
  fit_weights_.resize(weights_.size());
  for (std::size_t i = 0; i < weights_.size(); ++i) fit_weights_[i] = weights_[i] / mean;

  learners_ = prepare_learners(*data_.terms, *data_.frames, fit_weights_);
  state_ = initial_state(learners_, data_.y, weights_, options_.nu);

  const auto& terms = data_.terms->terms;
  term_of_learner_.assign(data_.terms->learners.size(), 0);
  for (std::size_t t = 0; t < terms.size(); ++t) {
    for (std::size_t j : terms[t].learners) term_of_learner_[j] = t;
  }
  term_seen_.assign(terms.size(), false);
  record_risk();
}

void Booster::record_risk() {
  const std::span<const double> eta(state_.eta.data(), static_cast<std::size_t>(state_.eta.size()));
  const double risk = probit_risk(data_.y, eta, weights_);
  if (!risk_path_.empty()) {
    const double prev = risk_path_.back();
    if (risk > prev + 1e-12 * std::max(1.0, std::abs(prev))) {
      const std::string msg = "training risk increased at iteration " +
                              std::to_string(state_.iteration) + " (" + std::to_string(prev) +
                              " -> " + std::to_string(risk) + ")";
      if (options_.strict_monotone) throw NumericalError(kModule, msg);
      log::warn(kModule, msg);
    }
  }
  risk_path_.push_back(risk);
  if (!evaluation_weights_.empty()) {
    const double total = as_vector(evaluation_weights_).sum();
    evaluation_risk_.push_back(probit_risk(data_.y, eta, evaluation_weights_) / total);
  }
}

void Booster::track_evaluation(std::vector<double> weights) {
  if (weights.size() != data_.n_rows()) throw DataError(kModule, "evaluation weights do not match rows");
  if (!(as_vector(weights).sum() > 0.0)) throw DataError(kModule, "evaluation weights are all zero");
  evaluation_weights_ = std::move(weights);
  evaluation_risk_.clear();
  const std::span<const double> eta(state_.eta.data(), static_cast<std::size_t>(state_.eta.size()));
  evaluation_risk_.push_back(probit_risk(data_.y, eta, evaluation_weights_) /
                             as_vector(evaluation_weights_).sum());
}

void Booster::step() {
  boost_step(state_, learners_, data_.y, fit_weights_, options_.execution);
  const std::size_t t = term_of_learner_[state_.history.back().learner];
  const auto& info = data_.terms->terms[t];
  if (info.selectable && !term_seen_[t]) {
    term_seen_[t] = true;
    selection_order_.push_back(info.id);
  }
  record_risk();
}

void Booster::run(std::size_t iterations) {
  for (std::size_t m = 0; m < iterations; ++m) step();
}

bool Booster::run_until_terms(std::size_t q, std::size_t max_iterations) {
  while (selection_order_.size() < q && state_.iteration < max_iterations) step();
  return selection_order_.size() >= q;
}

std::vector<std::string> Booster::selected_terms() const { return selection_order_; }

FittedModel Booster::model() const {
  FittedModel m;
  m.terms = data_.terms;
  for (const auto& l : learners_) {
    m.projections.push_back(l.projection());
    m.lambdas.push_back(l.lambda());
    if (l.spec().part == LearnerPart::linear) m.centers[l.spec().term_id] = l.projection()(0, 0);
  }
  m.coefficients = state_.coefficients;
  m.offset = state_.offset;
  m.nu = state_.nu;
  m.m_stop = state_.iteration;
  m.risk_path = risk_path_;
  m.history = state_.history;
  m.eta = eta_from_frames(m, *data_.frames, data_.n_rows());
  return m;
}

FittedModel fit(const ModelData& data, std::size_t m_stop, const BoostOptions& options) {
  Booster booster(data, data.weights, options);
  booster.run(m_stop);
  return booster.model();
}

// ---------------------------------------------------------------------------
// Prediction

std::vector<double> binary_outcome(const Dataset& ds, const OutcomeSpec& outcome) {
  if (!ds.has_column(outcome.column)) {
    throw ConfigError(kModule, "outcome column '" + outcome.column + "' not found");
  }
  const Column& col = ds.column(outcome.column);
  std::vector<double> y(ds.n_rows());
  if (col.schema.kind == ColumnKind::categorical) {
    std::vector<std::string> positive = outcome.positive;
    if (positive.empty()) {
      if (col.schema.levels.size() != 2) {
        throw ConfigError(kModule, "outcome '" + outcome.column +
                                       "' has more than two levels; name the positive levels");
      }
      positive.push_back(col.schema.levels[1 - col.schema.reference_index()]);
    }
    for (const auto& p : positive) {
      if (std::find(col.schema.levels.begin(), col.schema.levels.end(), p) == col.schema.levels.end()) {
        throw ConfigError(kModule, "positive level '" + p + "' is not a level of '" + outcome.column + "'");
      }
    }
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (col.is_missing(i)) throw DataError(kModule, "outcome is missing in row " + std::to_string(i + 1));
      y[i] = std::find(positive.begin(), positive.end(), col.label(i)) != positive.end() ? 1.0 : 0.0;
    }
    return y;
  }
  if (!col.schema.is_numeric()) throw ConfigError(kModule, "outcome column must be categorical or 0/1");
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double v = col.values[i];
    if (v != 0.0 && v != 1.0) {
      throw DataError(kModule, "outcome value in row " + std::to_string(i + 1) + " is not 0/1");
    }
    y[i] = v;
  }
  return y;
}

Eigen::VectorXd linear_predictor(const FittedModel& model, const Dataset& ds) {
  const auto& specs = model.terms->learners;
  std::vector<LearnerFrame> frames(specs.size());
  for (std::size_t j = 0; j < specs.size(); ++j) {
    if (!model.coefficients[j].isZero(0.0)) frames[j] = make_frame(specs[j], ds);
  }
  return eta_from_frames(model, frames, ds.n_rows());
}

std::vector<double> predict(const FittedModel& model, const Dataset& ds) {
  const Eigen::VectorXd eta = linear_predictor(model, ds);
  std::vector<double> p(static_cast<std::size_t>(eta.size()));
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = 0.5 * std::erfc(-eta(static_cast<Eigen::Index>(i)) / std::sqrt(2.0));
  }
  return p;
}

// ---------------------------------------------------------------------------
// Partial effects

EffectGrid default_grid(const FittedModel& model, const std::string& term_id, std::size_t points) {
  const TermInfo& info = find_term(model, term_id);
  EffectGrid grid;
  if (!info.selectable) {
    grid.levels = {"(Intercept)"};
    return grid;
  }
  const auto& first = model.terms->learners[info.learners.front()];
  const auto& last = model.terms->learners[info.learners.back()];
  auto axis = [&](const KnotGrid& g) {
    std::vector<double> v(points);
    for (std::size_t k = 0; k < points; ++k) {
      v[k] = points == 1 ? 0.5 * (g.lo + g.hi)
                         : g.lo + (g.hi - g.lo) * static_cast<double>(k) / static_cast<double>(points - 1);
    }
    if (points > 1) v.back() = g.hi;
    return v;
  };
  switch (info.type) {
    case TermType::linear: grid.levels = first.columns; break;
    case TermType::categorical: grid.levels = first.levels; break;
    case TermType::random: grid.levels = first.column_levels(); break;
    case TermType::smooth:
    case TermType::interaction: grid.x = axis(last.grids[0]); break;
    case TermType::surface:
    case TermType::spatial: {
      const auto a = axis(first.grids[0]);
      const auto b = axis(first.grids[1]);
      for (double xa : a) {
        for (double xb : b) {
          grid.x.push_back(xa);
          grid.y.push_back(xb);
        }
      }
      break;
    }
  }
  return grid;
}

PartialEffect partial_effect(const FittedModel& model, const std::string& term_id,
                             const EffectGrid& grid) {
  const TermInfo& info = find_term(model, term_id);
  const auto& specs = model.terms->learners;
  PartialEffect out;
  out.term_id = info.id;
  out.label = info.label;
  out.type = info.type;
  out.grid = grid;

  if (!info.selectable || info.type == TermType::linear || info.type == TermType::categorical ||
      info.type == TermType::random) {
    out.axes = {"level"};
    const std::size_t j = info.learners.front();
    const auto& spec = specs[j];
    std::vector<std::string> labels;
    if (!info.selectable) {
      labels = {"(Intercept)"};
    } else if (info.type == TermType::linear) {
      labels = spec.columns;
    } else {
      labels = spec.column_levels();
    }
    for (const auto& level : grid.levels) {
      const auto it = std::find(labels.begin(), labels.end(), level);
      if (it != labels.end()) {
        out.estimate.push_back(model.coefficients[j](it - labels.begin()));
      } else if (info.type == TermType::categorical && level == spec.levels[spec.reference]) {
        out.estimate.push_back(0.0);
      } else {
        throw ConfigError(kModule, "term '" + term_id + "' has no level '" + level + "'");
      }
    }
    return out;
  }

  const bool surface = info.type == TermType::surface || info.type == TermType::spatial;
  if (grid.x.empty() || (surface && grid.y.size() != grid.x.size())) {
    throw ConfigError(kModule, "grid for term '" + term_id + "' is empty or malformed");
  }
  const auto& ref = specs[info.learners.back()];
  std::size_t clamped = 0;
  std::vector<Column> cols;
  std::vector<double> x(grid.x.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = clamp_count(grid.x[i], ref.grids[0], clamped);
  cols.push_back(numeric(info.columns[0], x));
  out.axes = {info.columns[0]};
  if (surface) {
    std::vector<double> y2(grid.y.size());
    for (std::size_t i = 0; i < y2.size(); ++i) y2[i] = clamp_count(grid.y[i], ref.grids[1], clamped);
    cols.push_back(numeric(info.columns[1], y2));
    out.axes.push_back(info.columns[1]);
  }
  if (info.type == TermType::interaction) {
    Column by;
    by.schema.name = info.by;
    by.schema.kind = ColumnKind::categorical;
    by.schema.levels = {info.by_level};
    by.values.assign(x.size(), 0.0);
    cols.push_back(std::move(by));
  }
  if (clamped > 0) {
    log::warn(kModule, "term '" + term_id + "': " + std::to_string(clamped) +
                           " grid value(s) outside the training range clamped");
  }
  const Dataset ds(std::move(cols));
  Eigen::VectorXd est = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(x.size()));
  for (std::size_t j : info.learners) {
    if (model.coefficients[j].isZero(0.0)) continue;
    est += apply_design(specs[j], make_frame(specs[j], ds), model.projections[j], model.coefficients[j]);
  }
  out.estimate.assign(est.data(), est.data() + est.size());
  return out;
}

// ---------------------------------------------------------------------------
// Coefficient table

std::vector<CoefficientRow> coefficient_rows(const FittedModel& model, bool include_zero) {
  std::vector<CoefficientRow> rows;
  rows.push_back({"(offset)", "", "offset", model.offset});
  const auto& specs = model.terms->learners;
  auto keep = [&](double v) { return include_zero || v != 0.0; };
  for (const auto& info : model.terms->terms) {
    for (std::size_t j : info.learners) {
      const auto& spec = specs[j];
      const Eigen::VectorXd& b = model.coefficients[j];
      switch (spec.kind) {
        case LearnerKind::intercept:
          if (keep(b(0))) rows.push_back({info.id, "", "Intercept", b(0)});
          break;
        case LearnerKind::linear:
          for (std::size_t k = 0; k < spec.columns.size(); ++k) {
            const double v = b(static_cast<Eigen::Index>(k));
            if (keep(v)) rows.push_back({info.id, spec.columns[k], info.label, v});
          }
          break;
        case LearnerKind::linear_categorical: {
          const auto levels = spec.column_levels();
          for (std::size_t k = 0; k < levels.size(); ++k) {
            const double v = b(static_cast<Eigen::Index>(k));
            if (keep(v)) rows.push_back({info.id, levels[k], info.label, v});
          }
          break;
        }
        default:
          if (spec.part == LearnerPart::linear && keep(b(0))) {
            rows.push_back({info.id, "linear", info.label, b(0)});
          }
          break;
      }
    }
  }
  return rows;
}

void write_coefficient_table(std::span<const CoefficientRow> rows, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError(kModule, "cannot write '" + path.string() + "'");
  out << "level,factor,estimate,ci_low,ci_high\n";
  for (const auto& r : rows) {
    out << csv_escape(r.level) << ',' << csv_escape(r.factor) << ',' << format_double(r.estimate)
        << ',' << format_double(r.ci_low) << ',' << format_double(r.ci_high) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Serialization

std::string model_to_json(const FittedModel& model) {
  Json j;
  j["format_version"] = kModelFormatVersion;
  j["outcome"] = model.outcome;
  j["offset"] = model.offset;
  j["nu"] = model.nu;
  j["m_stop"] = model.m_stop;
  j["risk_path"] = model.risk_path;
  j["centers"] = model.centers;
  j["eta"] = vector_json(model.eta);
  j["history"] = Json::array();
  for (const auto& h : model.history) j["history"].push_back({h.iteration, h.learner, h.weighted_rss});
  j["formula"] = formula_to_json(model.terms->formula);

  j["terms"] = Json::array();
  for (const auto& t : model.terms->terms) {
    j["terms"].push_back({{"id", t.id},
                          {"label", t.label},
                          {"type", to_string(t.type)},
                          {"columns", t.columns},
                          {"by", t.by},
                          {"by_level", t.by_level},
                          {"learners", t.learners},
                          {"selectable", t.selectable}});
  }
  j["learners"] = Json::array();
  for (std::size_t k = 0; k < model.terms->learners.size(); ++k) {
    const auto& s = model.terms->learners[k];
    Json grids = Json::array();
    for (const auto& g : s.grids) {
      grids.push_back({{"inner_knots", g.inner_knots}, {"degree", g.degree}, {"lo", g.lo}, {"hi", g.hi}});
    }
    j["learners"].push_back({{"id", s.id},
                             {"term_id", s.term_id},
                             {"label", s.label},
                             {"kind", to_string(s.kind)},
                             {"part", to_string(s.part)},
                             {"columns", s.columns},
                             {"by_column", s.by_column},
                             {"by_level", s.by_level},
                             {"levels", s.levels},
                             {"reference", s.reference},
                             {"grids", grids},
                             {"transform", matrix_to_json(s.transform)},
                             {"constraint", constraint_name(s.constraint)},
                             {"penalized", s.penalized},
                             {"df_target", s.df_target},
                             {"projection", matrix_to_json(model.projections[k])},
                             {"lambda", model.lambdas[k]},
                             {"coefficients", vector_json(model.coefficients[k])}});
  }
  return j.dump(1);
}

FittedModel model_from_json(const std::string& text) {
  try {
    const Json j = Json::parse(text);
    const int version = j.at("format_version").get<int>();
    if (version != kModelFormatVersion) {
      throw DataError(kModule, "unsupported model format version " + std::to_string(version));
    }
    auto terms = std::make_shared<TermSet>();
    terms->formula = formula_from_json(j.at("formula"));
    for (const auto& t : j.at("terms")) {
      TermInfo info;
      info.id = t.at("id").get<std::string>();
      info.label = t.at("label").get<std::string>();
      info.type = term_type_from_string(t.at("type").get<std::string>());
      info.columns = t.at("columns").get<std::vector<std::string>>();
      info.by = t.at("by").get<std::string>();
      info.by_level = t.at("by_level").get<std::string>();
      info.learners = t.at("learners").get<std::vector<std::size_t>>();
      info.selectable = t.at("selectable").get<bool>();
      terms->terms.push_back(std::move(info));
    }
    FittedModel m;
    for (const auto& l : j.at("learners")) {
      LearnerSpec s;
      s.id = l.at("id").get<std::string>();
      s.term_id = l.at("term_id").get<std::string>();
      s.label = l.at("label").get<std::string>();
      s.kind = learner_kind_from_string(l.at("kind").get<std::string>());
      s.part = learner_part_from_string(l.at("part").get<std::string>());
      s.columns = l.at("columns").get<std::vector<std::string>>();
      s.by_column = l.at("by_column").get<std::string>();
      s.by_level = l.at("by_level").get<std::string>();
      s.levels = l.at("levels").get<std::vector<std::string>>();
      s.reference = l.at("reference").get<std::size_t>();
      for (const auto& g : l.at("grids")) {
        s.grids.push_back({g.at("inner_knots").get<int>(), g.at("degree").get<int>(),
                           g.at("lo").get<double>(), g.at("hi").get<double>()});
      }
      s.transform = matrix_from_json(l.at("transform"));
      s.constraint = constraint_from_name(l.at("constraint").get<std::string>());
      s.penalized = l.at("penalized").get<bool>();
      s.df_target = l.at("df_target").get<double>();
      m.projections.push_back(matrix_from_json(l.at("projection")));
      m.lambdas.push_back(l.at("lambda").get<double>());
      m.coefficients.push_back(vector_from(l.at("coefficients")));
      terms->learners.push_back(std::move(s));
    }
    m.terms = terms;
    m.outcome = j.at("outcome").get<std::string>();
    m.offset = j.at("offset").get<double>();
    m.nu = j.at("nu").get<double>();
    m.m_stop = j.at("m_stop").get<std::size_t>();
    m.risk_path = j.at("risk_path").get<std::vector<double>>();
    m.centers = j.at("centers").get<std::map<std::string, double>>();
    m.eta = vector_from(j.at("eta"));
    for (const auto& h : j.at("history")) {
      m.history.push_back({h.at(0).get<std::size_t>(), h.at(1).get<std::size_t>(), h.at(2).get<double>()});
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(kModule, std::string("malformed model file: ") + e.what());
  }
}

void save_model(const FittedModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError(kModule, "cannot write '" + path.string() + "'");
  out << model_to_json(model) << '\n';
}

FittedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(kModule, "cannot read model '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return model_from_json(buffer.str());
}

}  // namespace pboost
