#include "pboost/table.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <unordered_map>

#include "pboost/error.hpp"
#include "pboost/numeric.hpp"

namespace pboost {
namespace {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
const char* const kModule = "tabular-data";

std::optional<double> parse_number(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) {
    text.remove_suffix(1);
  }
  if (text.empty()) return std::nullopt;
  if (text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(value)) {
    return std::nullopt;
  }
  return value;
}

// Reads one CSV record, which may span lines inside quotes.
bool read_record(std::istream& in, std::string& record) {
  record.clear();
  std::string line;
  bool in_quotes = false;
  bool any = false;
  while (std::getline(in, line)) {
    any = true;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    for (char c : line) {
      if (c == '"') in_quotes = !in_quotes;
    }
    record += line;
    if (!in_quotes) return true;
    record += '\n';
  }
  return any;
}

void validate_schema(std::vector<ColumnSchema>& schema) {
  std::set<std::string> names;
  int weight_columns = 0;
  for (auto& col : schema) {
    if (col.name.empty()) throw ConfigError(kModule, "column with empty name in schema");
    if (!names.insert(col.name).second) {
      throw ConfigError(kModule, "duplicate column '" + col.name + "' in schema");
    }
    if (col.kind == ColumnKind::weight) ++weight_columns;
    if (col.kind == ColumnKind::categorical) {
      std::set<std::string> seen;
      for (const auto& level : col.levels) {
        if (level.empty()) throw ConfigError(kModule, "empty level in column '" + col.name + "'");
        if (!seen.insert(level).second) {
          throw ConfigError(kModule, "duplicate level '" + level + "' in column '" + col.name + "'");
        }
      }
      if (!col.reference.empty() && !col.levels.empty() && !seen.count(col.reference)) {
        throw ConfigError(kModule, "reference level '" + col.reference +
                                       "' is not a level of column '" + col.name + "'");
      }
    }
  }
  if (weight_columns > 1) throw ConfigError(kModule, "more than one weight column in schema");
}

bool holds(const Dataset& ds, const Condition& cond, std::size_t row) {
  const Column& left = ds.column(cond.column);
  if (left.is_missing(row)) return false;
  double lhs = left.values[row];
  double rhs = 0.0;
  if (const auto* number = std::get_if<double>(&cond.rhs)) {
    rhs = *number;
  } else if (const auto* label = std::get_if<std::string>(&cond.rhs)) {
    const auto& levels = left.schema.levels;
    const auto it = std::find(levels.begin(), levels.end(), *label);
    rhs = static_cast<double>(it - levels.begin());
  } else {
    const Column& right = ds.column(std::get<ColumnRef>(cond.rhs).name);
    if (right.is_missing(row)) return false;
    rhs = right.values[row];
  }
  switch (cond.op) {
    case CompareOp::lt: return lhs < rhs;
    case CompareOp::le: return lhs <= rhs;
    case CompareOp::gt: return lhs > rhs;
    case CompareOp::ge: return lhs >= rhs;
    case CompareOp::eq: return lhs == rhs;
    case CompareOp::ne: return lhs != rhs;
  }
  return false;
}

void check_rule(const Dataset& ds, const FilterRule& rule) {
  for (const auto& cond : rule.reject_if) {
    if (!ds.has_column(cond.column)) {
      throw ConfigError(kModule, "rule '" + rule.id + "' references unknown column '" +
                                     cond.column + "'");
    }
    const Column& left = ds.column(cond.column);
    if (left.schema.kind == ColumnKind::identifier) {
      throw ConfigError(kModule, "rule '" + rule.id + "' compares identifier column '" +
                                     cond.column + "'");
    }
    const bool categorical = left.schema.kind == ColumnKind::categorical;
    if (const auto* ref = std::get_if<ColumnRef>(&cond.rhs)) {
      if (!ds.has_column(ref->name)) {
        throw ConfigError(kModule, "rule '" + rule.id + "' references unknown column '" +
                                       ref->name + "'");
      }
      if (categorical || !ds.column(ref->name).schema.is_numeric()) {
        throw ConfigError(kModule, "rule '" + rule.id + "' compares non-numeric columns");
      }
    } else if (const auto* label = std::get_if<std::string>(&cond.rhs)) {
      const auto& levels = left.schema.levels;
      if (!categorical || std::find(levels.begin(), levels.end(), *label) == levels.end()) {
        throw ConfigError(kModule, "rule '" + rule.id + "': '" + *label +
                                       "' is not a level of column '" + cond.column + "'");
      }
      if (cond.op != CompareOp::eq && cond.op != CompareOp::ne) {
        throw ConfigError(kModule, "rule '" + rule.id + "': categorical columns support == and != only");
      }
    } else if (categorical) {
      throw ConfigError(kModule, "rule '" + rule.id + "': compare categorical column '" +
                                     cond.column + "' against a level label");
    }
  }
}

}  // namespace

std::string to_string(ColumnKind kind) {
  switch (kind) {
    case ColumnKind::continuous: return "continuous";
    case ColumnKind::categorical: return "categorical";
    case ColumnKind::identifier: return "identifier";
    case ColumnKind::weight: return "weight";
    case ColumnKind::coordinate: return "coordinate";
  }
  return "continuous";
}

ColumnKind column_kind_from_string(const std::string& text) {
  if (text == "continuous") return ColumnKind::continuous;
  if (text == "categorical") return ColumnKind::categorical;
  if (text == "identifier") return ColumnKind::identifier;
  if (text == "weight") return ColumnKind::weight;
  if (text == "coordinate") return ColumnKind::coordinate;
  throw ConfigError(kModule, "unknown column kind '" + text + "'");
}

std::size_t ColumnSchema::reference_index() const {
  if (reference.empty()) return 0;
  const auto it = std::find(levels.begin(), levels.end(), reference);
  if (it == levels.end()) {
    throw ConfigError(kModule, "reference level '" + reference + "' not in column '" + name + "'");
  }
  return static_cast<std::size_t>(it - levels.begin());
}

bool Column::is_missing(std::size_t row) const {
  if (schema.kind == ColumnKind::identifier) return text[row].empty();
  return std::isnan(values[row]);
}

std::size_t Column::missing_count() const {
  std::size_t count = 0;
  for (std::size_t i = 0; i < size(); ++i) count += is_missing(i) ? 1 : 0;
  return count;
}

const std::string& Column::label(std::size_t row) const {
  if (is_missing(row)) {
    throw DataError(kModule, "missing value in column '" + schema.name + "' at row " +
                                 std::to_string(row + 1));
  }
  return schema.levels[static_cast<std::size_t>(values[row])];
}

Dataset::Dataset(std::vector<Column> columns) : columns_(std::move(columns)) {
  n_rows_ = columns_.empty() ? 0 : columns_.front().size();
  const Column* weight = nullptr;
  for (const auto& col : columns_) {
    if (col.size() != n_rows_) {
      throw DataError(kModule, "column '" + col.schema.name + "' has " +
                                   std::to_string(col.size()) + " rows, expected " +
                                   std::to_string(n_rows_));
    }
    if (col.schema.kind == ColumnKind::weight) {
      if (weight) throw ConfigError(kModule, "more than one weight column");
      weight = &col;
    }
    if (col.schema.kind == ColumnKind::categorical) {
      const auto k = static_cast<double>(col.schema.levels.size());
      for (std::size_t i = 0; i < n_rows_; ++i) {
        const double v = col.values[i];
        if (!std::isnan(v) && (v < 0 || v >= k || v != std::floor(v))) {
          throw DataError(kModule, "invalid level code in column '" + col.schema.name +
                                       "' at row " + std::to_string(i + 1));
        }
      }
    }
  }
  if (weight) {
    weights_ = weight->values;
    double total = 0.0;
    for (std::size_t i = 0; i < n_rows_; ++i) {
      const double w = weights_[i];
      if (!std::isfinite(w) || w < 0.0) {
        throw DataError(kModule, "weight column '" + weight->schema.name +
                                     "' has invalid value at row " + std::to_string(i + 1));
      }
      total += w;
    }
    if (n_rows_ > 0 && total <= 0.0) throw DataError(kModule, "all weights are zero");
  } else {
    weights_.assign(n_rows_, 1.0);
  }
}

std::vector<ColumnSchema> Dataset::schema() const {
  std::vector<ColumnSchema> out;
  out.reserve(columns_.size());
  for (const auto& col : columns_) out.push_back(col.schema);
  return out;
}

bool Dataset::has_column(const std::string& name) const {
  return std::any_of(columns_.begin(), columns_.end(),
                     [&](const Column& c) { return c.schema.name == name; });
}

std::size_t Dataset::column_index(const std::string& name) const {
  for (std::size_t j = 0; j < columns_.size(); ++j) {
    if (columns_[j].schema.name == name) return j;
  }
  throw ConfigError(kModule, "unknown column '" + name + "'");
}

const Column& Dataset::column(const std::string& name) const {
  return columns_[column_index(name)];
}

bool Dataset::has_weight_column() const {
  return std::any_of(columns_.begin(), columns_.end(),
                     [](const Column& c) { return c.schema.kind == ColumnKind::weight; });
}

std::size_t Dataset::missing_cells() const {
  std::size_t total = 0;
  for (const auto& col : columns_) total += col.missing_count();
  return total;
}

Dataset Dataset::select_rows(std::span<const std::size_t> rows) const {
  std::vector<Column> out;
  out.reserve(columns_.size());
  for (const auto& col : columns_) {
    Column c{col.schema, {}, {}};
    if (col.schema.kind == ColumnKind::identifier) {
      c.text.reserve(rows.size());
      for (auto r : rows) c.text.push_back(col.text[r]);
    } else {
      c.values.reserve(rows.size());
      for (auto r : rows) c.values.push_back(col.values[r]);
    }
    out.push_back(std::move(c));
  }
  return Dataset(std::move(out));
}

Dataset Dataset::with_column(Column column) const {
  auto cols = columns_;
  bool replaced = false;
  for (auto& c : cols) {
    if (c.schema.name == column.schema.name) {
      c = column;
      replaced = true;
    }
  }
  if (!replaced) cols.push_back(std::move(column));
  return Dataset(std::move(cols));
}

// ---------------------------------------------------------------------------
// CSV

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  bool in_quotes = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      in_quotes = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else {
      field += c;
    }
  }
  fields.push_back(std::move(field));
  return fields;
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string format_double(double value) {
  if (std::isnan(value)) return "";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

Dataset parse_csv(std::istream& in, std::vector<ColumnSchema> schema, LoadSummary* summary) {
  validate_schema(schema);
  std::string record;
  if (!read_record(in, record)) throw DataError(kModule, "empty CSV input (header required)");
  if (record.size() >= 3 && record.compare(0, 3, "\xEF\xBB\xBF") == 0) record.erase(0, 3);
  const auto header = split_csv_line(record);
  std::unordered_map<std::string, std::size_t> position;
  for (std::size_t j = 0; j < header.size(); ++j) position.emplace(header[j], j);

  struct Slot {
    std::size_t schema_index;
    std::size_t file_index;
  };
  std::vector<Slot> slots;
  for (std::size_t s = 0; s < schema.size(); ++s) {
    const auto it = position.find(schema[s].name);
    if (it == position.end()) {
      if (schema[s].required || schema[s].kind == ColumnKind::weight) {
        throw DataError(kModule, "schema error: missing required column '" + schema[s].name + "'");
      }
      continue;
    }
    slots.push_back({s, it->second});
  }

  std::vector<std::vector<std::string>> raw(schema.size());
  std::size_t line_no = 1;
  while (read_record(in, record)) {
    ++line_no;
    if (record.empty()) continue;
    auto fields = split_csv_line(record);
    if (fields.size() != header.size()) {
      throw DataError(kModule, "parse error at row " + std::to_string(line_no) + ": expected " +
                                   std::to_string(header.size()) + " fields, found " +
                                   std::to_string(fields.size()));
    }
    for (const auto& slot : slots) raw[slot.schema_index].push_back(std::move(fields[slot.file_index]));
  }

  std::vector<Column> columns;
  for (const auto& slot : slots) {
    ColumnSchema sch = schema[slot.schema_index];
    const auto& cells = raw[slot.schema_index];
    Column col{sch, {}, {}};
    if (sch.kind == ColumnKind::identifier) {
      col.text = cells;
    } else if (sch.kind == ColumnKind::categorical) {
      if (col.schema.levels.empty()) {
        std::set<std::string> distinct;
        for (const auto& cell : cells) {
          if (!cell.empty()) distinct.insert(cell);
        }
        col.schema.levels.assign(distinct.begin(), distinct.end());
        if (!col.schema.reference.empty() && !distinct.count(col.schema.reference)) {
          throw ConfigError(kModule, "reference level '" + col.schema.reference +
                                         "' does not occur in column '" + sch.name + "'");
        }
      }
      std::unordered_map<std::string, std::size_t> code;
      for (std::size_t k = 0; k < col.schema.levels.size(); ++k) code.emplace(col.schema.levels[k], k);
      col.values.reserve(cells.size());
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (cells[i].empty()) {
          col.values.push_back(kMissing);
          continue;
        }
        const auto it = code.find(cells[i]);
        if (it == code.end()) {
          throw DataError(kModule, "parse error at row " + std::to_string(i + 2) + ": value '" +
                                       cells[i] + "' is not a level of column '" + sch.name + "'");
        }
        col.values.push_back(static_cast<double>(it->second));
      }
    } else {
      col.values.reserve(cells.size());
      for (const auto& cell : cells) col.values.push_back(parse_number(cell).value_or(kMissing));
      if (sch.kind == ColumnKind::weight) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
          if (std::isnan(col.values[i])) {
            throw DataError(kModule, "parse error at row " + std::to_string(i + 2) +
                                         ": weight column '" + sch.name + "' must not be missing");
          }
        }
      }
    }
    columns.push_back(std::move(col));
  }

  Dataset ds(std::move(columns));
  if (summary) {
    summary->n_rows = ds.n_rows();
    summary->missing.clear();
    for (const auto& col : ds.columns()) summary->missing[col.schema.name] = col.missing_count();
  }
  return ds;
}

Dataset load_csv(const std::filesystem::path& path, std::vector<ColumnSchema> schema,
                 LoadSummary* summary) {
  std::ifstream in(path);
  if (!in) throw DataError(kModule, "cannot open '" + path.string() + "'");
  return parse_csv(in, std::move(schema), summary);
}

void write_csv(const Dataset& ds, std::ostream& out) {
  const auto& cols = ds.columns();
  for (std::size_t j = 0; j < cols.size(); ++j) {
    out << (j ? "," : "") << csv_escape(cols[j].schema.name);
  }
  out << '\n';
  for (std::size_t i = 0; i < ds.n_rows(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) {
      if (j) out << ',';
      const Column& col = cols[j];
      if (col.schema.kind == ColumnKind::identifier) {
        out << csv_escape(col.text[i]);
      } else if (col.schema.kind == ColumnKind::categorical) {
        if (!col.is_missing(i)) out << csv_escape(col.label(i));
      } else {
        out << format_double(col.values[i]);
      }
    }
    out << '\n';
  }
}

void write_csv(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError(kModule, "cannot write '" + path.string() + "'");
  write_csv(ds, out);
}

// ---------------------------------------------------------------------------
// Filters

CompareOp compare_op_from_string(const std::string& text) {
  if (text == "<") return CompareOp::lt;
  if (text == "<=") return CompareOp::le;
  if (text == ">") return CompareOp::gt;
  if (text == ">=") return CompareOp::ge;
  if (text == "==") return CompareOp::eq;
  if (text == "!=") return CompareOp::ne;
  throw ConfigError(kModule, "unknown comparison operator '" + text + "'");
}

std::pair<Dataset, RejectionReport> apply_plausibility_filters(const Dataset& ds,
                                                               std::span<const FilterRule> rules) {
  for (const auto& rule : rules) check_rule(ds, rule);
  RejectionReport report;
  report.rows_in = ds.n_rows();
  for (const auto& rule : rules) report.rules.push_back({rule.id, rule.description, 0});

  std::vector<std::size_t> keep;
  keep.reserve(ds.n_rows());
  for (std::size_t i = 0; i < ds.n_rows(); ++i) {
    bool rejected = false;
    for (std::size_t r = 0; r < rules.size() && !rejected; ++r) {
      const auto& conds = rules[r].reject_if;
      if (conds.empty()) continue;
      rejected = std::all_of(conds.begin(), conds.end(),
                             [&](const Condition& c) { return holds(ds, c, i); });
      if (rejected) ++report.rules[r].rows_rejected;
    }
    if (!rejected) keep.push_back(i);
  }
  report.rows_out = keep.size();
  return {ds.select_rows(keep), report};
}

std::pair<Dataset, RejectionReport> remove_outliers_iqr(const Dataset& ds,
                                                        std::span<const std::string> columns,
                                                        double multiplier) {
  if (!(multiplier > 0.0)) throw ConfigError(kModule, "outlier multiplier must be positive");
  struct Fence {
    const Column* column;
    double lo;
    double hi;
  };
  std::vector<Fence> fences;
  RejectionReport report;
  report.rows_in = ds.n_rows();
  for (const auto& name : columns) {
    if (!ds.has_column(name)) throw ConfigError(kModule, "unknown outlier column '" + name + "'");
    const Column& col = ds.column(name);
    if (col.schema.kind != ColumnKind::continuous && col.schema.kind != ColumnKind::coordinate) {
      throw ConfigError(kModule, "outlier column '" + name + "' is not continuous");
    }
    std::vector<double> observed;
    for (double v : col.values) {
      if (!std::isnan(v)) observed.push_back(v);
    }
    if (observed.empty()) {
      fences.push_back({&col, -INFINITY, INFINITY});
    } else {
      const double q1 = quantile_type7(observed, 0.25);
      const double q3 = quantile_type7(observed, 0.75);
      const double iqr = q3 - q1;
      fences.push_back({&col, q1 - multiplier * iqr, q3 + multiplier * iqr});
    }
    report.rules.push_back({"iqr:" + name, "boxplot fence outlier in " + name, 0});
  }

  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < ds.n_rows(); ++i) {
    bool rejected = false;
    for (std::size_t f = 0; f < fences.size() && !rejected; ++f) {
      const double v = fences[f].column->values[i];
      rejected = !std::isnan(v) && (v < fences[f].lo || v > fences[f].hi);
      if (rejected) ++report.rules[f].rows_rejected;
    }
    if (!rejected) keep.push_back(i);
  }
  report.rows_out = keep.size();
  return {ds.select_rows(keep), report};
}

void write_rejection_report(const RejectionReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError(kModule, "cannot write '" + path.string() + "'");
  out << "rule_id,description,rows_rejected\n";
  for (const auto& r : report.rules) {
    out << csv_escape(r.rule_id) << ',' << csv_escape(r.description) << ',' << r.rows_rejected
        << '\n';
  }
}

std::pair<Dataset, std::map<std::string, double>> center_continuous(
    const Dataset& ds, std::span<const std::string> columns) {
  std::map<std::string, double> centers;
  Dataset out = ds;
  for (const auto& name : columns) {
    const Column& col = ds.column(name);
    if (col.schema.kind != ColumnKind::continuous && col.schema.kind != ColumnKind::coordinate) {
      throw ConfigError(kModule, "cannot center non-continuous column '" + name + "'");
    }
    if (col.missing_count() == col.size()) {
      throw DataError(kModule, "cannot center all-missing column '" + name + "'");
    }
    const double center = weighted_mean(col.values, ds.weights());
    Column shifted = col;
    for (double& v : shifted.values) v -= center;
    centers[name] = center;
    out = out.with_column(std::move(shifted));
  }
  return {std::move(out), std::move(centers)};
}

DummyBlock dummy_code(const Dataset& ds, const std::string& column) {
  const Column& col = ds.column(column);
  if (col.schema.kind != ColumnKind::categorical) {
    throw ConfigError(kModule, "dummy coding requires a categorical column, got '" + column + "'");
  }
  const std::size_t k = col.schema.levels.size();
  if (k < 2) throw ConfigError(kModule, "column '" + column + "' needs at least two levels");
  if (col.missing_count() > 0) {
    throw DataError(kModule, "column '" + column + "' has missing values; impute before dummy coding");
  }
  const std::size_t ref = col.schema.reference_index();
  DummyBlock block;
  block.reference = col.schema.levels[ref];
  std::vector<std::ptrdiff_t> column_of(k, -1);
  for (std::size_t l = 0; l < k; ++l) {
    if (l == ref) continue;
    column_of[l] = static_cast<std::ptrdiff_t>(block.levels.size());
    block.levels.push_back(col.schema.levels[l]);
  }
  block.indicators = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(ds.n_rows()),
                                           static_cast<Eigen::Index>(k - 1));
  for (std::size_t i = 0; i < ds.n_rows(); ++i) {
    const auto c = column_of[static_cast<std::size_t>(col.values[i])];
    if (c >= 0) block.indicators(static_cast<Eigen::Index>(i), c) = 1.0;
  }
  return block;
}

std::vector<std::string> decode_dummies(const DummyBlock& block) {
  std::vector<std::string> labels;
  for (Eigen::Index i = 0; i < block.indicators.rows(); ++i) {
    std::string label = block.reference;
    for (Eigen::Index c = 0; c < block.indicators.cols(); ++c) {
      if (block.indicators(i, c) == 1.0) label = block.levels[static_cast<std::size_t>(c)];
    }
    labels.push_back(label);
  }
  return labels;
}

}  // namespace pboost
