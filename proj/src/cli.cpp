#include "pboost/cli.hpp"

#include <fstream>
#include <iostream>

#include <json.hpp>
#include <omp.h>

#include "pboost/engine.hpp"
#include "pboost/error.hpp"
#include "pboost/imputation.hpp"
#include "pboost/log.hpp"
#include "pboost/report.hpp"
#include "pboost/selection.hpp"
#include "pboost/simgen.hpp"

namespace pboost {
namespace {

const char* const kModule = "cli";

using Json = nlohmann::json;
namespace fs = std::filesystem;

fs::path out_file(const RunConfig& cfg, const std::string& name) { return cfg.output_dir / name; }

void write_json(const Json& j, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError(kModule, "cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

Json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(kModule, "cannot read '" + path.string() + "'");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw DataError(kModule, "'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

Dataset load_stage_input(const RunConfig& cfg, const std::string& name, const char* producer) {
  const fs::path path = out_file(cfg, name);
  if (!fs::exists(path)) {
    throw DataError(kModule, "'" + path.string() + "' not found; run `" + producer + "` first");
  }
  return load_csv(path, cfg.schema);
}

SelectionOptions selection_options(const RunConfig& cfg) {
  SelectionOptions opts;
  opts.boost.nu = cfg.nu;
  opts.workers = cfg.workers;
  return opts;
}

ModelData model_data(const RunConfig& cfg) {
  if (cfg.formula.terms.empty()) throw ConfigError(kModule, "model.terms is empty");
  const Dataset ds = load_stage_input(cfg, "imputed.csv", "impute");
  auto y = binary_outcome(ds, cfg.outcome);
  const TermSet terms = build_term_set(cfg.formula, ds);
  return make_model_data(terms, ds, std::move(y));
}

std::size_t resolve_m_stop(const RunConfig& cfg) {
  if (cfg.m_stop) return *cfg.m_stop;
  const fs::path path = out_file(cfg, "tuning.json");
  if (!fs::exists(path)) {
    throw ConfigError(kModule, "no m_stop: set fit.m_stop or run `tune` first");
  }
  return read_json(path).at("m_star").get<std::size_t>();
}

void stage_simulate(const RunConfig& cfg) {
  if (!cfg.simulate) throw ConfigError(kModule, "`simulate` needs a 'simulate' section");
  if (cfg.input.empty()) throw ConfigError(kModule, "`simulate` needs 'input' as the target path");
  const auto sim = gen_probit_data(*cfg.simulate);
  if (cfg.input.has_parent_path()) fs::create_directories(cfg.input.parent_path());
  write_csv(sim.data, cfg.input);
  fs::path truth = cfg.input;
  truth.replace_extension(".truth.json");
  save_truth(sim.truth, truth);
  log::info(kModule, "wrote " + std::to_string(sim.data.n_rows()) + " simulated rows");
}

void stage_prepare(const RunConfig& cfg) {
  if (cfg.input.empty()) throw ConfigError(kModule, "'input' is not set");
  LoadSummary summary;
  const Dataset raw = load_csv(cfg.input, cfg.schema, &summary);
  auto [filtered, filter_report] = apply_plausibility_filters(raw, cfg.filters);
  write_rejection_report(filter_report, out_file(cfg, "rejections_filters.csv"));
  auto [cleaned, outlier_report] =
      remove_outliers_iqr(filtered, cfg.outlier_columns, cfg.outlier_multiplier);
  write_rejection_report(outlier_report, out_file(cfg, "rejections_outliers.csv"));
  write_csv(cleaned, out_file(cfg, "cleaned.csv"));
  log::info(kModule, "prepare: " + std::to_string(raw.n_rows()) + " rows in, " +
                         std::to_string(cleaned.n_rows()) + " rows out");
}

void stage_impute(const RunConfig& cfg) {
  const Dataset cleaned = load_stage_input(cfg, "cleaned.csv", "prepare");
  std::ofstream log_file(out_file(cfg, "impute_log.txt"));
  if (!log_file) throw DataError(kModule, "cannot write impute_log.txt");
  if (!cfg.impute) {
    log_file << "imputation disabled; " << cleaned.missing_cells() << " missing cells kept\n";
    write_csv(cleaned, out_file(cfg, "imputed.csv"));
    return;
  }
  const auto result = pmm_impute(cleaned, cfg.imputation);
  for (const auto& line : result.log) log_file << line << '\n';
  for (const auto& [column, count] : result.imputed_counts) {
    log_file << "imputed " << column << ": " << count << '\n';
  }
  // Imputed values can violate the plausibility rules; they are screened again.
  auto [screened, report] = apply_plausibility_filters(result.data, cfg.filters);
  write_rejection_report(report, out_file(cfg, "rejections_imputed.csv"));
  log_file << "rows removed after imputation: " << report.rows_removed() << '\n';
  write_csv(screened, out_file(cfg, "imputed.csv"));
}

void stage_tune(const RunConfig& cfg) {
  const ModelData data = model_data(cfg);
  const auto result = tune_mstop(data, cfg.tuning, cfg.m_max, selection_options(cfg));
  write_risk_curves(result, out_file(cfg, "risk_curves.csv"));
  write_json({{"m_star", result.m_star},
              {"m_max", cfg.m_max},
              {"replicates", cfg.tuning.n_replicates},
              {"fraction", cfg.tuning.fraction},
              {"stratified", cfg.tuning.stratify_by_outcome},
              {"mean_risk_at_m_star", result.mean_curve[result.m_star]}},
             out_file(cfg, "tuning.json"));
  log::info(kModule, "tune: m_star = " + std::to_string(result.m_star));
}

void stage_fit(const RunConfig& cfg) {
  const ModelData data = model_data(cfg);
  FittedModel model = fit(data, resolve_m_stop(cfg), selection_options(cfg).boost);
  model.outcome = cfg.outcome.column;
  save_model(model, out_file(cfg, "model.json"));
  const auto rows = coefficient_rows(model, false);
  write_coefficient_table(rows, out_file(cfg, "coefficients.csv"));
}

void stage_stabsel(const RunConfig& cfg) {
  const ModelData data = model_data(cfg);
  const auto report = stability_select(data, cfg.stability, selection_options(cfg));
  write_stability_report(report, out_file(cfg, "stability.csv"));
  write_json({{"replicates", report.n_replicates},
              {"fraction", cfg.stability.plan.fraction},
              {"threshold", report.threshold},
              {"q", report.q},
              {"selectable_terms", report.term_ids.size()},
              {"pfer_bound", report.pfer_bound},
              {"capped_replicates", report.capped_replicates},
              {"stable_set", report.stable_set}},
             out_file(cfg, "stability_summary.json"));
}

void stage_bands(const RunConfig& cfg) {
  const ModelData data = model_data(cfg);
  const std::size_t m_stop = resolve_m_stop(cfg);
  auto result = bootstrap_bands(data, m_stop, cfg.bands, selection_options(cfg));
  result.model.outcome = cfg.outcome.column;
  for (const auto& pe : result.effects) {
    const std::string stem = "partial_" + sanitize_filename(pe.term_id);
    write_partial_effect_csv(pe, out_file(cfg, stem + ".csv"));
    render_partial_effect_svg(pe, out_file(cfg, stem + ".svg"));
  }
  write_coefficient_table(result.coefficients, out_file(cfg, "coefficients.csv"));
  write_json({{"estimate", "full-data fit at m_stop"},
              {"m_stop", m_stop},
              {"replicates", cfg.bands.plan.n_replicates},
              {"level", cfg.bands.level},
              {"interval", "pointwise percentile (type 7 quantiles)"}},
             out_file(cfg, "bands_summary.json"));
}

}  // namespace

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names{"prepare", "impute", "tune", "fit",
                                              "stabsel", "bands", "all", "simulate"};
  return names;
}

void run_stage(const std::string& subcommand, const RunConfig& cfg) {
  if (subcommand == "simulate") {
    stage_simulate(cfg);
    return;
  }
  validate(cfg);
  fs::create_directories(cfg.output_dir);
  if (subcommand == "prepare") {
    stage_prepare(cfg);
  } else if (subcommand == "impute") {
    stage_impute(cfg);
  } else if (subcommand == "tune") {
    stage_tune(cfg);
  } else if (subcommand == "fit") {
    stage_fit(cfg);
  } else if (subcommand == "stabsel") {
    stage_stabsel(cfg);
  } else if (subcommand == "bands") {
    stage_bands(cfg);
  } else if (subcommand == "all") {
    stage_prepare(cfg);
    stage_impute(cfg);
    if (!cfg.m_stop) stage_tune(cfg);
    stage_fit(cfg);
    stage_stabsel(cfg);
    stage_bands(cfg);
  } else {
    throw ConfigError(kModule, "unknown subcommand '" + subcommand + "'");
  }
}

int run(const std::string& subcommand, const CliOptions& options) {
  try {
    RunConfig cfg = load_config(options.config);
    if (options.seed) cfg.apply_seed(*options.seed);
    if (options.workers) cfg.workers = *options.workers;
    if (options.out) cfg.output_dir = *options.out;
    if (cfg.workers > 0) omp_set_num_threads(cfg.workers);
    if (options.verbose) {
      log::set_sink([](log::Level level, std::string_view module, std::string_view message) {
        std::cerr << (level == log::Level::warning ? "warning " : "") << '[' << module << "] "
                  << message << '\n';
      });
    }
    run_stage(subcommand, cfg);
    return 0;
  } catch (const Error& e) {
    std::cerr << "pboost: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "pboost: [cli] " << e.what() << '\n';
    return exit_code(ErrorKind::data);
  } catch (const std::exception& e) {
    std::cerr << "pboost: [cli] " << e.what() << '\n';
    return exit_code(ErrorKind::numerical);
  }
}

}  // namespace pboost
