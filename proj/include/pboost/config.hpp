#pragma once

// Run configuration of the command-line pipeline (JSON document).

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pboost/engine.hpp"
#include "pboost/imputation.hpp"
#include "pboost/selection.hpp"
#include "pboost/simgen.hpp"
#include "pboost/table.hpp"

namespace pboost {

struct RunConfig {
  std::filesystem::path input;
  std::filesystem::path output_dir = "out";
  std::uint64_t seed = 1;
  int workers = 0;

  std::vector<ColumnSchema> schema;
  OutcomeSpec outcome;
  std::vector<FilterRule> filters;
  std::vector<std::string> outlier_columns;
  double outlier_multiplier = 1.5;

  bool impute = true;
  ImputationConfig imputation;

  ModelFormula formula;
  double nu = 0.5;

  ResamplePlan tuning{25, 0.5, 1, true};
  std::size_t m_max = 1000;
  std::optional<std::size_t> m_stop;  ///< overrides the tuned m_star

  StabilityOptions stability;
  BandOptions bands;

  /// Only used by the `simulate` subcommand, which writes `input`.
  std::optional<TruthSpec> simulate;

  /// Seeds of the stages, derived from `seed`.
  void apply_seed(std::uint64_t value);
};

/// Relative paths are resolved against `base_dir`.
RunConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

/// Cross-field checks that do not need the data: formula columns exist in
/// the schema, nu in (0, 1], threshold in (0.5, 1], ...
void validate(const RunConfig& cfg);

}  // namespace pboost
