#include "pboost/config.hpp"

#include <algorithm>
#include <fstream>

#include "pboost/error.hpp"
#include "pboost/json_io.hpp"
#include "pboost/rng.hpp"

namespace pboost {
namespace {

const char* const kModule = "cli";

using Json = nlohmann::json;

template <typename T>
T read(const Json& j, const char* key, T fallback) {
  if (!j.is_object() || !j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception&) {
    throw ConfigError(kModule, std::string("bad value for '") + key + "'");
  }
}

const Json& section(const Json& j, const char* key) {
  static const Json empty = Json::object();
  if (!j.contains(key)) return empty;
  if (!j.at(key).is_object()) throw ConfigError(kModule, std::string("'") + key + "' must be an object");
  return j.at(key);
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return {};
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

ColumnSchema parse_column(const Json& j) {
  ColumnSchema c;
  c.name = read<std::string>(j, "name", "");
  if (c.name.empty()) throw ConfigError(kModule, "schema entry without a name");
  c.kind = column_kind_from_string(read<std::string>(j, "kind", "continuous"));
  c.levels = read<std::vector<std::string>>(j, "levels", {});
  c.reference = read<std::string>(j, "reference", "");
  c.required = read<bool>(j, "required", true);
  return c;
}

Condition parse_condition(const Json& j) {
  Condition c;
  c.column = read<std::string>(j, "column", "");
  if (c.column.empty()) throw ConfigError(kModule, "filter condition without a column");
  c.op = compare_op_from_string(read<std::string>(j, "op", ""));
  const int given = static_cast<int>(j.contains("value")) + static_cast<int>(j.contains("level")) +
                    static_cast<int>(j.contains("other"));
  if (given != 1) {
    throw ConfigError(kModule, "filter condition on '" + c.column +
                                   "' needs exactly one of value, level, other");
  }
  if (j.contains("value")) {
    c.rhs = read<double>(j, "value", 0.0);
  } else if (j.contains("level")) {
    c.rhs = read<std::string>(j, "level", "");
  } else {
    c.rhs = ColumnRef{read<std::string>(j, "other", "")};
  }
  return c;
}

FilterRule parse_filter(const Json& j, std::size_t index) {
  FilterRule r;
  r.id = read<std::string>(j, "id", "rule" + std::to_string(index + 1));
  r.description = read<std::string>(j, "description", "");
  if (!j.contains("reject_if") || !j.at("reject_if").is_array() || j.at("reject_if").empty()) {
    throw ConfigError(kModule, "filter '" + r.id + "' needs a non-empty reject_if list");
  }
  for (const auto& c : j.at("reject_if")) r.reject_if.push_back(parse_condition(c));
  return r;
}

bool has_schema_column(const RunConfig& cfg, const std::string& name) {
  return std::any_of(cfg.schema.begin(), cfg.schema.end(),
                     [&](const ColumnSchema& c) { return c.name == name; });
}

}  // namespace

void RunConfig::apply_seed(std::uint64_t value) {
  seed = value;
  tuning.seed = derive_seed(value, 1);
  stability.plan.seed = derive_seed(value, 2);
  bands.plan.seed = derive_seed(value, 3);
  imputation.seed = derive_seed(value, 4);
}

RunConfig parse_config(const Json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ConfigError(kModule, "configuration must be a JSON object");
  RunConfig cfg;
  cfg.input = resolve(base_dir, read<std::string>(j, "input", ""));
  cfg.output_dir = resolve(base_dir, read<std::string>(j, "output_dir", "out"));
  cfg.workers = read<int>(j, "workers", 0);

  if (j.contains("schema")) {
    if (!j.at("schema").is_array()) throw ConfigError(kModule, "'schema' must be an array");
    for (const auto& c : j.at("schema")) cfg.schema.push_back(parse_column(c));
  }
  const Json& outcome = section(j, "outcome");
  cfg.outcome.column = read<std::string>(outcome, "column", "");
  cfg.outcome.positive = read<std::vector<std::string>>(outcome, "positive", {});

  if (j.contains("filters")) {
    if (!j.at("filters").is_array()) throw ConfigError(kModule, "'filters' must be an array");
    for (std::size_t k = 0; k < j.at("filters").size(); ++k) {
      cfg.filters.push_back(parse_filter(j.at("filters")[k], k));
    }
  }
  const Json& outliers = section(j, "outliers");
  cfg.outlier_columns = read<std::vector<std::string>>(outliers, "columns", {});
  cfg.outlier_multiplier = read<double>(outliers, "multiplier", 1.5);

  const Json& imp = section(j, "imputation");
  cfg.impute = read<bool>(imp, "enabled", true);
  cfg.imputation.donor_pool_size = read<std::size_t>(imp, "donors", 5);
  cfg.imputation.n_cycles = read<std::size_t>(imp, "cycles", 5);
  cfg.imputation.predictors =
      read<std::map<std::string, std::vector<std::string>>>(imp, "predictors", {});

  const Json& model = section(j, "model");
  if (model.contains("terms")) cfg.formula = formula_from_json(model);
  cfg.nu = read<double>(model, "nu", 0.5);

  const Json& tuning = section(j, "tuning");
  cfg.tuning.n_replicates = read<std::size_t>(tuning, "replicates", 25);
  cfg.tuning.fraction = read<double>(tuning, "fraction", 0.5);
  cfg.tuning.stratify_by_outcome = read<bool>(tuning, "stratify", true);
  cfg.m_max = read<std::size_t>(tuning, "m_max", 1000);

  const Json& fit = section(j, "fit");
  if (fit.contains("m_stop") && !fit.at("m_stop").is_null()) cfg.m_stop = read<std::size_t>(fit, "m_stop", 0);

  const Json& stab = section(j, "stability");
  cfg.stability.plan.n_replicates = read<std::size_t>(stab, "replicates", 100);
  cfg.stability.plan.fraction = read<double>(stab, "fraction", 0.5);
  cfg.stability.plan.stratify_by_outcome = read<bool>(stab, "stratify", true);
  cfg.stability.threshold = read<double>(stab, "threshold", 0.8);
  cfg.stability.q = read<std::size_t>(stab, "q", 35);
  cfg.stability.m_max = read<std::size_t>(stab, "m_max", 10000);

  const Json& bands = section(j, "bands");
  cfg.bands.plan.n_replicates = read<std::size_t>(bands, "replicates", 1000);
  cfg.bands.plan.stratify_by_outcome = read<bool>(bands, "stratify", true);
  cfg.bands.level = read<double>(bands, "level", 0.95);
  cfg.bands.grid_points = read<std::size_t>(bands, "grid_points", 50);
  cfg.bands.terms = read<std::vector<std::string>>(bands, "terms", {});

  if (j.contains("simulate")) cfg.simulate = truth_from_json(j.at("simulate"));

  cfg.apply_seed(read<std::uint64_t>(j, "seed", 1));
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(kModule, "cannot read configuration '" + path.string() + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError(kModule, "configuration is not valid JSON: " + std::string(e.what()));
  }
  return parse_config(j, path.parent_path());
}

void validate(const RunConfig& cfg) {
  if (!(cfg.nu > 0.0 && cfg.nu <= 1.0)) throw ConfigError(kModule, "model.nu must be in (0, 1]");
  if (!(cfg.stability.threshold > 0.5 && cfg.stability.threshold <= 1.0)) {
    throw ConfigError(kModule, "stability.threshold must be in (0.5, 1]");
  }
  if (!(cfg.bands.level > 0.0 && cfg.bands.level < 1.0)) {
    throw ConfigError(kModule, "bands.level must be in (0, 1)");
  }
  if (cfg.workers < 0) throw ConfigError(kModule, "workers must be >= 0");
  if (cfg.bands.grid_points < 1) throw ConfigError(kModule, "bands.grid_points must be >= 1");
  if (cfg.schema.empty()) throw ConfigError(kModule, "schema is empty");
  if (!has_schema_column(cfg, cfg.outcome.column)) {
    throw ConfigError(kModule, "outcome column '" + cfg.outcome.column + "' is not in the schema");
  }
  for (const auto& t : cfg.formula.terms) {
    const std::string name = t.id.empty() ? to_string(t.type) + " term" : "term '" + t.id + "'";
    for (const auto& c : t.columns) {
      if (!has_schema_column(cfg, c)) {
        throw ConfigError(kModule, name + " references column '" + c + "' missing from the schema");
      }
      if (c == cfg.outcome.column) throw ConfigError(kModule, name + " uses the outcome column");
    }
    if (!t.by.empty() && !has_schema_column(cfg, t.by)) {
      throw ConfigError(kModule, name + " references column '" + t.by + "' missing from the schema");
    }
  }
  for (const auto& c : cfg.outlier_columns) {
    if (!has_schema_column(cfg, c)) {
      throw ConfigError(kModule, "outlier column '" + c + "' is not in the schema");
    }
  }
}

}  // namespace pboost
