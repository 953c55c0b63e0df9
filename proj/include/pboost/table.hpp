#pragma once

// Columnar survey tables: typed loading, plausibility filters, boxplot
// outlier removal, centering and dummy coding.

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace pboost {

enum class ColumnKind { continuous, categorical, identifier, weight, coordinate };

std::string to_string(ColumnKind kind);
ColumnKind column_kind_from_string(const std::string& text);

struct ColumnSchema {
  std::string name;
  ColumnKind kind = ColumnKind::continuous;
  /// Categorical only. Empty at load time means "infer sorted distinct labels".
  std::vector<std::string> levels;
  /// Categorical only. Empty means the first level.
  std::string reference;
  bool required = true;

  bool is_numeric() const {
    return kind == ColumnKind::continuous || kind == ColumnKind::coordinate ||
           kind == ColumnKind::weight;
  }
  std::size_t reference_index() const;
};

/// One column. Numeric kinds store values, categorical kinds store the level
/// index as a double, identifiers store text. Missing cells are NaN (or an
/// empty string for identifiers).
struct Column {
  ColumnSchema schema;
  std::vector<double> values;
  std::vector<std::string> text;

  std::size_t size() const {
    return schema.kind == ColumnKind::identifier ? text.size() : values.size();
  }
  bool is_missing(std::size_t row) const;
  std::size_t missing_count() const;
  /// Level label of a categorical cell; throws on missing.
  const std::string& label(std::size_t row) const;
};

/// Immutable table with per-row survey weights.
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(std::vector<Column> columns);

  std::size_t n_rows() const { return n_rows_; }
  std::size_t n_columns() const { return columns_.size(); }
  const std::vector<Column>& columns() const { return columns_; }
  std::vector<ColumnSchema> schema() const;

  bool has_column(const std::string& name) const;
  const Column& column(const std::string& name) const;
  std::size_t column_index(const std::string& name) const;

  /// Survey weights from the weight column, or all ones.
  const std::vector<double>& weights() const { return weights_; }
  bool has_weight_column() const;

  std::size_t missing_cells() const;

  Dataset select_rows(std::span<const std::size_t> rows) const;
  Dataset with_column(Column column) const;

 private:
  std::vector<Column> columns_;
  std::size_t n_rows_ = 0;
  std::vector<double> weights_;
};

struct LoadSummary {
  std::size_t n_rows = 0;
  std::map<std::string, std::size_t> missing;
};

/// Reads a comma-separated file with a mandatory header. Columns are matched
/// by name; unparseable or empty cells become missing. Columns present in the
/// file but absent from the schema are ignored.
Dataset load_csv(const std::filesystem::path& path, std::vector<ColumnSchema> schema,
                 LoadSummary* summary = nullptr);
Dataset parse_csv(std::istream& in, std::vector<ColumnSchema> schema,
                  LoadSummary* summary = nullptr);

void write_csv(const Dataset& ds, const std::filesystem::path& path);
void write_csv(const Dataset& ds, std::ostream& out);

/// Shortest decimal text that parses back to the same double. NaN -> "".
std::string format_double(double value);

/// Minimal CSV row splitting with double-quote escaping.
std::vector<std::string> split_csv_line(const std::string& line);
std::string csv_escape(const std::string& field);

// ---------------------------------------------------------------------------
// Filtering

enum class CompareOp { lt, le, gt, ge, eq, ne };

CompareOp compare_op_from_string(const std::string& text);

struct ColumnRef {
  std::string name;
};

/// `column op rhs`, where rhs is a number, a categorical level label or
/// another column.
struct Condition {
  std::string column;
  CompareOp op = CompareOp::gt;
  std::variant<double, std::string, ColumnRef> rhs;
};

/// A row is rejected when every condition holds. Conditions touching a
/// missing cell never hold, so such rows are kept.
struct FilterRule {
  std::string id;
  std::string description;
  std::vector<Condition> reject_if;
};

struct RejectionCount {
  std::string rule_id;
  std::string description;
  std::size_t rows_rejected = 0;
};

/// Each removed row is charged to the first rule that rejects it, so the
/// counts sum to the number of removed rows.
struct RejectionReport {
  std::vector<RejectionCount> rules;
  std::size_t rows_in = 0;
  std::size_t rows_out = 0;

  std::size_t rows_removed() const { return rows_in - rows_out; }
};

std::pair<Dataset, RejectionReport> apply_plausibility_filters(
    const Dataset& ds, std::span<const FilterRule> rules);

/// Single pass: fences [Q1 - k IQR, Q3 + k IQR] from type-7 quartiles of the
/// non-missing input values.
std::pair<Dataset, RejectionReport> remove_outliers_iqr(const Dataset& ds,
                                                        std::span<const std::string> columns,
                                                        double multiplier = 1.5);

void write_rejection_report(const RejectionReport& report, const std::filesystem::path& path);

std::pair<Dataset, std::map<std::string, double>> center_continuous(
    const Dataset& ds, std::span<const std::string> columns);

struct DummyBlock {
  Eigen::MatrixXd indicators;        // n x (k - 1)
  std::vector<std::string> levels;   // non-reference labels, column order
  std::string reference;
};

DummyBlock dummy_code(const Dataset& ds, const std::string& column);

/// Inverse of dummy_code: recovers the level label of each row.
std::vector<std::string> decode_dummies(const DummyBlock& block);

}  // namespace pboost
