#pragma once

// Pipeline stages behind the command-line subcommands.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pboost/config.hpp"

namespace pboost {

struct CliOptions {
  std::filesystem::path config;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::filesystem::path> out;
  bool verbose = false;
};

/// prepare, impute, tune, fit, stabsel, bands, all, simulate
const std::vector<std::string>& subcommands();

/// Runs one subcommand on a loaded configuration. Throws pboost errors.
void run_stage(const std::string& subcommand, const RunConfig& cfg);

/// Loads the configuration, applies flag overrides and runs the subcommand.
/// Returns the process exit code (0, 2 config, 3 data, 4 numerical) and
/// reports errors on stderr.
int run(const std::string& subcommand, const CliOptions& options);

}  // namespace pboost
