#include "pboost/json_io.hpp"

#include "pboost/error.hpp"

namespace pboost {
namespace {

const char* const kModule = "cli";

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(kModule, std::string("bad value for '") + key + "': " + e.what());
  }
}

}  // namespace

nlohmann::json term_to_json(const TermSpec& term) {
  nlohmann::json j;
  j["id"] = term.id;
  j["label"] = term.label;
  j["type"] = to_string(term.type);
  j["columns"] = term.columns;
  if (!term.by.empty()) j["by"] = term.by;
  if (!term.by_level.empty()) j["by_level"] = term.by_level;
  if (!term.reference.empty()) j["reference"] = term.reference;
  if (term.inner_knots) j["inner_knots"] = *term.inner_knots;
  if (term.degree) j["degree"] = *term.degree;
  if (term.df) j["df"] = *term.df;
  return j;
}

TermSpec term_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError(kModule, "model term must be an object");
  TermSpec t;
  t.type = term_type_from_string(get_or<std::string>(j, "type", ""));
  t.id = get_or<std::string>(j, "id", "");
  t.label = get_or<std::string>(j, "label", "");
  if (j.contains("column")) t.columns.push_back(get_or<std::string>(j, "column", ""));
  for (const auto& c : get_or<std::vector<std::string>>(j, "columns", {})) t.columns.push_back(c);
  t.by = get_or<std::string>(j, "by", "");
  t.by_level = get_or<std::string>(j, "by_level", "");
  t.reference = get_or<std::string>(j, "reference", "");
  if (j.contains("inner_knots")) t.inner_knots = get_or<int>(j, "inner_knots", 20);
  if (j.contains("degree")) t.degree = get_or<int>(j, "degree", 3);
  if (j.contains("df")) t.df = get_or<double>(j, "df", 1.0);
  return t;
}

nlohmann::json formula_to_json(const ModelFormula& formula) {
  nlohmann::json j;
  j["inner_knots"] = formula.inner_knots;
  j["degree"] = formula.degree;
  j["surface_inner_knots"] = formula.surface_inner_knots;
  j["surface_degree"] = formula.surface_degree;
  j["df"] = formula.df;
  j["terms"] = nlohmann::json::array();
  for (const auto& t : formula.terms) j["terms"].push_back(term_to_json(t));
  return j;
}

ModelFormula formula_from_json(const nlohmann::json& j) {
  ModelFormula f;
  f.inner_knots = get_or<int>(j, "inner_knots", f.inner_knots);
  f.degree = get_or<int>(j, "degree", f.degree);
  f.surface_inner_knots = get_or<int>(j, "surface_inner_knots", f.surface_inner_knots);
  f.surface_degree = get_or<int>(j, "surface_degree", f.surface_degree);
  f.df = get_or<double>(j, "df", f.df);
  if (!j.contains("terms") || !j.at("terms").is_array()) {
    throw ConfigError(kModule, "model.terms must be an array");
  }
  for (const auto& t : j.at("terms")) f.terms.push_back(term_from_json(t));
  return f;
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index k = 0; k < m.cols(); ++k) data.push_back(m(i, k));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
    throw DataError("boost-engine", "matrix payload has wrong size");
  }
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = data[static_cast<std::size_t>(i * cols + k)];
  }
  return m;
}

}  // namespace pboost
