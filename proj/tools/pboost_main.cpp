#include <CLI11.hpp>

#include "pboost/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Component-wise boosting for additive probit models"};
  pboost::CliOptions options;
  std::uint64_t seed = 0;
  int workers = 0;
  std::string out;

  app.require_subcommand(1);
  const std::vector<std::pair<std::string, std::string>> commands{
      {"prepare", "apply plausibility filters and outlier removal"},
      {"impute", "fill missing cells by predictive mean matching"},
      {"tune", "choose m_stop from subsample risk curves"},
      {"fit", "fit the model on the full data"},
      {"stabsel", "stability selection"},
      {"bands", "bootstrap confidence bands and plots"},
      {"all", "run every stage in order"},
      {"simulate", "write a synthetic input dataset"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", options.config, "run configuration (JSON)")->required();
    sub->add_option("--seed", seed, "overrides the configured seed");
    sub->add_option("--workers", workers, "replicate pool size")->check(CLI::NonNegativeNumber);
    sub->add_option("--out", out, "output directory");
    sub->add_flag("--verbose,-v", options.verbose, "print progress messages");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const auto* sub = app.get_subcommands().front();
  if (sub->count("--seed")) options.seed = seed;
  if (sub->count("--workers")) options.workers = workers;
  if (sub->count("--out")) options.out = out;
  return pboost::run(sub->get_name(), options);
}
