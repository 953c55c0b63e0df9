#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pboost/table.hpp"

namespace pboost {

struct ImputationConfig {
  std::size_t donor_pool_size = 5;
  std::size_t n_cycles = 5;
  std::uint64_t seed = 1;
  /// Per-target predictor lists; targets not listed use every other
  /// continuous, coordinate and categorical column.
  std::map<std::string, std::vector<std::string>> predictors;
};

struct ImputationResult {
  Dataset data;
  std::vector<std::string> log;
  std::map<std::string, std::size_t> imputed_counts;
};

/// Single imputation by chained predictive mean matching. Each missing cell
/// receives the observed value of a donor drawn uniformly from the
/// `donor_pool_size` observed rows whose predicted means are closest.
ImputationResult pmm_impute(const Dataset& ds, const ImputationConfig& cfg);

}  // namespace pboost
