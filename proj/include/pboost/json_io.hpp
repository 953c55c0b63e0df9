#pragma once

// JSON conversions shared by the model file and the run configuration.

#include <json.hpp>

#include "pboost/learners.hpp"

namespace pboost {

nlohmann::json term_to_json(const TermSpec& term);
TermSpec term_from_json(const nlohmann::json& j);

nlohmann::json formula_to_json(const ModelFormula& formula);
/// Reads `terms` plus the optional knot/degree/df defaults.
ModelFormula formula_from_json(const nlohmann::json& j);

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j);

}  // namespace pboost
