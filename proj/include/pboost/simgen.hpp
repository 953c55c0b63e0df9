#pragma once

// Synthetic probit data with known truth, and brute-force oracles for the
// test and acceptance suites.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "pboost/table.hpp"

namespace pboost {

enum class SmoothShape { sine, quadratic, step };

std::string to_string(SmoothShape shape);
SmoothShape smooth_shape_from_string(const std::string& text);

/// sin(pi x), x^2 - 1/3, or -0.5 / +0.5 split at 0; each has mean zero on [-1, 1].
double smooth_value(SmoothShape shape, double x);

struct LinearEffect {
  std::string name;
  double coef = 0.0;
};

struct SmoothEffect {
  std::string name;
  SmoothShape shape = SmoothShape::sine;
  double amplitude = 1.0;
};

/// Additive effect per level; levels are named L0, L1, ... and L0 is the reference.
struct CategoricalEffect {
  std::string name;
  std::vector<double> level_effects;
};

struct TruthSpec {
  std::size_t n = 500;
  std::vector<LinearEffect> linear;
  std::vector<SmoothEffect> smooth;
  std::vector<CategoricalEffect> categorical;
  std::size_t noise_continuous = 0;   ///< columns noise1, noise2, ...
  std::size_t noise_categorical = 0;  ///< columns noisecat1, ...
  std::size_t noise_levels = 3;
  bool weighted = false;              ///< adds weight column "w" ~ U[0.5, 2]
  double intercept = 0.0;
  std::uint64_t seed = 1;
};

struct SimulatedData {
  Dataset data;  ///< covariates, outcome "y" (0/1) and optionally "w"
  TruthSpec truth;
  std::vector<double> eta;
};

/// Continuous covariates iid U[-1, 1], categorical uniform over levels,
/// y ~ Bernoulli(Phi(eta)). Deterministic in the seed.
SimulatedData gen_probit_data(const TruthSpec& spec);

/// The true linear predictor of the rows of a generated dataset.
std::vector<double> recompute_eta(const TruthSpec& spec, const Dataset& ds);

nlohmann::json truth_to_json(const TruthSpec& spec);
TruthSpec truth_from_json(const nlohmann::json& j);
void save_truth(const TruthSpec& spec, const std::filesystem::path& path);
TruthSpec load_truth(const std::filesystem::path& path);

/// Weighted probit MLE by Newton iterations with the exact Hessian and step
/// halving. Throws NumericalError if the gradient norm does not fall below
/// 1e-8 within 100 iterations.
Eigen::VectorXd oracle_irls_probit(const Eigen::MatrixXd& X, std::span<const double> y,
                                   std::span<const double> w);

/// Central differences of f at eta, one coordinate at a time.
std::vector<double> finite_diff_gradient(const std::function<double(std::span<const double>)>& f,
                                         std::span<const double> eta, double step);

}  // namespace pboost
