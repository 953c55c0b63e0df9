#pragma once

#include <span>
#include <vector>

namespace pboost {

/// Standard normal density, distribution function and quantile.
double normal_pdf(double x);
double normal_cdf(double x);
double normal_quantile(double p);

/// Sample quantile by linear interpolation between order statistics
/// (Hyndman-Fan type 7). `values` need not be sorted.
double quantile_type7(std::vector<double> values, double prob);

double weighted_mean(std::span<const double> values, std::span<const double> weights);

}  // namespace pboost
