#include "pboost/probit.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "pboost/error.hpp"
#include "pboost/numeric.hpp"

namespace pboost {
namespace {

constexpr double kLogFloor = 1e-300;

double clamp_eta(double eta) { return std::clamp(eta, -kEtaClamp, kEtaClamp); }

// Phi(eta) via erfc keeps full relative precision in the lower tail down to
// eta = -30 (about 5e-198).
double upper_safe_cdf(double eta) { return 0.5 * std::erfc(-eta / std::numbers::sqrt2); }

}  // namespace

double log_normal_cdf(double eta) {
  return std::log(std::max(upper_safe_cdf(clamp_eta(eta)), kLogFloor));
}

double probit_risk(std::span<const double> y, std::span<const double> eta,
                   std::span<const double> w) {
  if (y.size() != eta.size() || y.size() != w.size()) {
    throw DataError("boost-engine", "probit_risk: length mismatch");
  }
  // Neumaier summation: risk differences between iterations are tiny
  // compared to the total.
  double sum = 0.0;
  double carry = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (w[i] == 0.0) continue;
    const double e = clamp_eta(eta[i]);
    const double term = -w[i] * (y[i] * log_normal_cdf(e) + (1.0 - y[i]) * log_normal_cdf(-e));
    const double t = sum + term;
    carry += std::abs(sum) >= std::abs(term) ? (sum - t) + term : (term - t) + sum;
    sum = t;
  }
  return sum + carry;
}

double probit_negative_gradient(double y, double eta) {
  const double e = clamp_eta(eta);
  const double density = normal_pdf(e);
  // d/d eta of log Phi(eta) is the inverse Mills ratio phi / Phi.
  const double up = density / upper_safe_cdf(e);
  const double down = density / upper_safe_cdf(-e);
  return y * up - (1.0 - y) * down;
}

std::vector<double> negative_gradient(std::span<const double> y, std::span<const double> eta) {
  if (y.size() != eta.size()) throw DataError("boost-engine", "negative_gradient: length mismatch");
  std::vector<double> u(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) u[i] = probit_negative_gradient(y[i], eta[i]);
  return u;
}

double offset_init(std::span<const double> y, std::span<const double> w) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    num += w[i] * y[i];
    den += w[i];
  }
  const double p = num / den;
  if (!(p > 0.0 && p < 1.0)) {
    throw DataError("boost-engine", "outcome is degenerate (weighted mean " + std::to_string(p) +
                                        "); need both classes");
  }
  return normal_quantile(p);
}

}  // namespace pboost
