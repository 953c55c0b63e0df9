#pragma once

#include <span>
#include <vector>

namespace pboost {

/// Linear predictors are clamped to [-kEtaClamp, kEtaClamp] before the
/// normal CDF and density are evaluated.
inline constexpr double kEtaClamp = 30.0;

/// log Phi(eta) without cancellation in the lower tail.
double log_normal_cdf(double eta);

/// Weighted probit negative log-likelihood
/// sum_i w_i * -[y_i log Phi(eta_i) + (1 - y_i) log(1 - Phi(eta_i))].
double probit_risk(std::span<const double> y, std::span<const double> eta,
                   std::span<const double> w);

/// Negative gradient of the per-observation probit loss with respect to eta.
double probit_negative_gradient(double y, double eta);
std::vector<double> negative_gradient(std::span<const double> y, std::span<const double> eta);

/// Phi^{-1} of the weighted outcome mean: the best constant predictor.
double offset_init(std::span<const double> y, std::span<const double> w);

}  // namespace pboost
