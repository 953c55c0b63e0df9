#include "pboost/simgen.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

#include "pboost/error.hpp"
#include "pboost/numeric.hpp"
#include "pboost/probit.hpp"
#include "pboost/rng.hpp"

namespace pboost {
namespace {

const char* const kModule = "simgen";

std::vector<std::string> level_names(std::size_t k) {
  std::vector<std::string> out;
  for (std::size_t l = 0; l < k; ++l) out.push_back("L" + std::to_string(l));
  return out;
}

Column continuous_column(const std::string& name, Rng& rng, std::size_t n) {
  Column c;
  c.schema.name = name;
  c.schema.kind = ColumnKind::continuous;
  c.values.resize(n);
  for (auto& v : c.values) v = -1.0 + 2.0 * rng.uniform();
  return c;
}

Column categorical_column(const std::string& name, std::size_t levels, Rng& rng, std::size_t n) {
  if (levels < 2) throw ConfigError(kModule, "categorical '" + name + "' needs at least two levels");
  Column c;
  c.schema.name = name;
  c.schema.kind = ColumnKind::categorical;
  c.schema.levels = level_names(levels);
  c.schema.reference = "L0";
  c.values.resize(n);
  for (auto& v : c.values) v = static_cast<double>(rng.index(levels));
  return c;
}

// Hessian weight of the per-observation probit loss.
double curvature(double y, double eta) {
  const double e = std::clamp(eta, -kEtaClamp, kEtaClamp);
  const double density = normal_pdf(e);
  if (y == 1.0) {
    const double l1 = density / normal_cdf(e);
    return l1 * (l1 + e);
  }
  const double l0 = density / normal_cdf(-e);
  return l0 * (l0 - e);
}

// Row count passed separately: a spec without covariates has an empty table.
std::vector<double> eta_of(const TruthSpec& spec, const Dataset& ds, std::size_t n) {
  std::vector<double> eta(n, spec.intercept);
  for (const auto& e : spec.linear) {
    const auto& x = ds.column(e.name).values;
    for (std::size_t i = 0; i < eta.size(); ++i) eta[i] += e.coef * x[i];
  }
  for (const auto& e : spec.smooth) {
    const auto& x = ds.column(e.name).values;
    for (std::size_t i = 0; i < eta.size(); ++i) eta[i] += e.amplitude * smooth_value(e.shape, x[i]);
  }
  for (const auto& e : spec.categorical) {
    const auto& codes = ds.column(e.name).values;
    for (std::size_t i = 0; i < eta.size(); ++i) {
      eta[i] += e.level_effects[static_cast<std::size_t>(codes[i])];
    }
  }
  return eta;
}

}  // namespace

std::string to_string(SmoothShape shape) {
  switch (shape) {
    case SmoothShape::sine: return "sine";
    case SmoothShape::quadratic: return "quadratic";
    case SmoothShape::step: return "step";
  }
  return "sine";
}

SmoothShape smooth_shape_from_string(const std::string& text) {
  if (text == "sine") return SmoothShape::sine;
  if (text == "quadratic") return SmoothShape::quadratic;
  if (text == "step") return SmoothShape::step;
  throw ConfigError(kModule, "unknown smooth shape '" + text + "'");
}

double smooth_value(SmoothShape shape, double x) {
  switch (shape) {
    case SmoothShape::sine: return std::sin(std::numbers::pi * x);
    case SmoothShape::quadratic: return x * x - 1.0 / 3.0;
    case SmoothShape::step: return x < 0.0 ? -0.5 : 0.5;
  }
  return 0.0;
}

SimulatedData gen_probit_data(const TruthSpec& spec) {
  if (spec.n < 10) throw ConfigError(kModule, "n must be at least 10");
  const std::size_t n = spec.n;
  Rng rng(spec.seed);
  std::vector<Column> cols;
  for (const auto& e : spec.linear) cols.push_back(continuous_column(e.name, rng, n));
  for (const auto& e : spec.smooth) cols.push_back(continuous_column(e.name, rng, n));
  for (const auto& e : spec.categorical) {
    cols.push_back(categorical_column(e.name, e.level_effects.size(), rng, n));
  }
  for (std::size_t k = 1; k <= spec.noise_continuous; ++k) {
    cols.push_back(continuous_column("noise" + std::to_string(k), rng, n));
  }
  for (std::size_t k = 1; k <= spec.noise_categorical; ++k) {
    cols.push_back(categorical_column("noisecat" + std::to_string(k), spec.noise_levels, rng, n));
  }
  if (spec.weighted) {
    Column w;
    w.schema.name = "w";
    w.schema.kind = ColumnKind::weight;
    w.values.resize(n);
    for (auto& v : w.values) v = 0.5 + 1.5 * rng.uniform();
    cols.push_back(std::move(w));
  }
  const Dataset covariates(cols);
  SimulatedData out;
  out.truth = spec;
  out.eta = eta_of(spec, covariates, n);

  Column y;
  y.schema.name = "y";
  y.schema.kind = ColumnKind::continuous;
  y.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) y.values[i] = rng.uniform() < normal_cdf(out.eta[i]) ? 1.0 : 0.0;
  cols.insert(cols.begin(), std::move(y));
  out.data = Dataset(std::move(cols));
  return out;
}

std::vector<double> recompute_eta(const TruthSpec& spec, const Dataset& ds) {
  return eta_of(spec, ds, ds.n_rows());
}

nlohmann::json truth_to_json(const TruthSpec& spec) {
  nlohmann::json j;
  j["n"] = spec.n;
  j["seed"] = spec.seed;
  j["intercept"] = spec.intercept;
  j["weighted"] = spec.weighted;
  j["noise_continuous"] = spec.noise_continuous;
  j["noise_categorical"] = spec.noise_categorical;
  j["noise_levels"] = spec.noise_levels;
  j["linear"] = nlohmann::json::array();
  for (const auto& e : spec.linear) j["linear"].push_back({{"name", e.name}, {"coef", e.coef}});
  j["smooth"] = nlohmann::json::array();
  for (const auto& e : spec.smooth) {
    j["smooth"].push_back({{"name", e.name}, {"shape", to_string(e.shape)}, {"amplitude", e.amplitude}});
  }
  j["categorical"] = nlohmann::json::array();
  for (const auto& e : spec.categorical) {
    j["categorical"].push_back({{"name", e.name}, {"level_effects", e.level_effects}});
  }
  return j;
}

TruthSpec truth_from_json(const nlohmann::json& j) {
  try {
    TruthSpec s;
    s.n = j.value("n", s.n);
    s.seed = j.value("seed", s.seed);
    s.intercept = j.value("intercept", s.intercept);
    s.weighted = j.value("weighted", s.weighted);
    s.noise_continuous = j.value("noise_continuous", s.noise_continuous);
    s.noise_categorical = j.value("noise_categorical", s.noise_categorical);
    s.noise_levels = j.value("noise_levels", s.noise_levels);
    for (const auto& e : j.value("linear", nlohmann::json::array())) {
      s.linear.push_back({e.at("name").get<std::string>(), e.at("coef").get<double>()});
    }
    for (const auto& e : j.value("smooth", nlohmann::json::array())) {
      s.smooth.push_back({e.at("name").get<std::string>(),
                          smooth_shape_from_string(e.at("shape").get<std::string>()),
                          e.value("amplitude", 1.0)});
    }
    for (const auto& e : j.value("categorical", nlohmann::json::array())) {
      s.categorical.push_back({e.at("name").get<std::string>(),
                               e.at("level_effects").get<std::vector<double>>()});
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(kModule, std::string("malformed truth specification: ") + e.what());
  }
}

void save_truth(const TruthSpec& spec, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError(kModule, "cannot write '" + path.string() + "'");
  out << truth_to_json(spec).dump(2) << '\n';
}

TruthSpec load_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(kModule, "cannot read '" + path.string() + "'");
  try {
    return truth_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(kModule, std::string("truth file is not valid JSON: ") + e.what());
  }
}

Eigen::VectorXd oracle_irls_probit(const Eigen::MatrixXd& X, std::span<const double> y,
                                   std::span<const double> w) {
  const auto n = X.rows();
  if (static_cast<Eigen::Index>(y.size()) != n || static_cast<Eigen::Index>(w.size()) != n) {
    throw DataError(kModule, "oracle_irls_probit: dimension mismatch");
  }
  const Eigen::Map<const Eigen::VectorXd> wv(w.data(), n);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(X.cols());
  Eigen::VectorXd eta = X * beta;
  auto risk_at = [&](const Eigen::VectorXd& e) {
    return probit_risk(y, std::span<const double>(e.data(), static_cast<std::size_t>(n)), w);
  };
  double risk = risk_at(eta);
  double grad_norm = 0.0;
  for (int iter = 0; iter < 100; ++iter) {
    Eigen::VectorXd wu(n);
    Eigen::VectorXd h(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(i);
      wu(i) = wv(i) * probit_negative_gradient(y[k], eta(i));
      h(i) = wv(i) * curvature(y[k], eta(i));
    }
    const Eigen::VectorXd score = X.transpose() * wu;
    grad_norm = score.norm();
    if (grad_norm < 1e-8) {
      // If the converged predictor splits the classes, the outcome is
      // separated and the likelihood has no finite maximizer.
      double lowest_one = std::numeric_limits<double>::infinity();
      double highest_zero = -lowest_one;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (wv(i) <= 0.0) continue;
        if (y[static_cast<std::size_t>(i)] == 1.0) {
          lowest_one = std::min(lowest_one, eta(i));
        } else {
          highest_zero = std::max(highest_zero, eta(i));
        }
      }
      if (lowest_one > highest_zero) {
        throw NumericalError(kModule, "outcome is separated by the covariates; no finite MLE");
      }
      return beta;
    }
    const Eigen::MatrixXd hessian = X.transpose() * h.asDiagonal() * X;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(hessian);
    const Eigen::VectorXd pivots = ldlt.vectorD();
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
        pivots.minCoeff() <= 1e-12 * std::max(pivots.maxCoeff(), 1e-300)) {
      throw NumericalError(kModule, "oracle Hessian is not positive definite (is X full rank?)");
    }
    const Eigen::VectorXd delta = ldlt.solve(score);
    double t = 1.0;
    for (int halving = 0; halving < 50; ++halving, t *= 0.5) {
      const Eigen::VectorXd candidate = beta + t * delta;
      const Eigen::VectorXd candidate_eta = X * candidate;
      const double candidate_risk = risk_at(candidate_eta);
      if (candidate_risk <= risk) {
        beta = candidate;
        eta = candidate_eta;
        risk = candidate_risk;
        break;
      }
    }
  }
  throw NumericalError(kModule, "oracle did not converge in 100 iterations (gradient norm " +
                                    std::to_string(grad_norm) + ")");
}

std::vector<double> finite_diff_gradient(const std::function<double(std::span<const double>)>& f,
                                         std::span<const double> eta, double step) {
  if (!(step > 0.0)) throw ConfigError(kModule, "finite-difference step must be positive");
  std::vector<double> x(eta.begin(), eta.end());
  std::vector<double> grad(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double saved = x[k];
    x[k] = saved + step;
    const double up = f(x);
    x[k] = saved - step;
    const double down = f(x);
    x[k] = saved;
    grad[k] = (up - down) / (2.0 * step);
  }
  return grad;
}

}  // namespace pboost
