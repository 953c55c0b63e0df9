#pragma once

// Component-wise functional gradient descent on the weighted probit
// negative log-likelihood.

#include <filesystem>
#include <limits>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pboost/learners.hpp"
#include "pboost/table.hpp"

namespace pboost {

enum class Execution { serial, parallel };

struct HistoryEntry {
  std::size_t iteration = 0;
  std::size_t learner = 0;
  double weighted_rss = 0.0;
};

/// Additive predictor and per-learner aggregated coefficients.
/// Invariant: eta = offset + sum_j X_j coefficients[j].
struct BoostState {
  Eigen::VectorXd eta;
  std::size_t iteration = 0;
  std::vector<HistoryEntry> history;
  std::vector<Eigen::VectorXd> coefficients;
  double nu = 0.5;
  double offset = 0.0;
};

/// State at the risk-minimizing constant for the given learners.
BoostState initial_state(std::span<const PreparedLearner> learners, std::span<const double> y,
                         std::span<const double> w, double nu);
BoostState initial_state(std::span<const BaseLearner> learners, std::span<const double> y,
                         std::span<const double> w, double nu);

/// One boosting iteration: fit every learner to the negative gradient, add the
/// nu-scaled fit of the learner with the smallest weighted RSS (lowest index on
/// ties). Learners whose fit is not finite are skipped with a warning.
/// `w` must be the weights the learners were prepared with.
void boost_step(BoostState& state, std::span<const PreparedLearner> learners,
                std::span<const double> y, std::span<const double> w,
                Execution execution = Execution::parallel);

namespace reference {
/// Serial step on dense learners through fit_penalized_ls; kept as the
/// independent check of the fast path.
void boost_step(BoostState& state, std::span<const BaseLearner> learners,
                std::span<const double> y, std::span<const double> w);
}  // namespace reference

struct BoostOptions {
  double nu = 0.5;
  Execution execution = Execution::parallel;
  /// Throw instead of warning when the training risk increases.
  bool strict_monotone = false;
};

struct FittedModel {
  std::shared_ptr<const TermSet> terms;
  std::vector<Eigen::MatrixXd> projections;
  std::vector<Eigen::VectorXd> coefficients;
  std::vector<double> lambdas;
  double offset = 0.0;
  double nu = 0.5;
  std::size_t m_stop = 0;
  std::vector<double> risk_path;
  std::vector<HistoryEntry> history;
  /// Weighted means subtracted by the centered linear parts, by term id.
  std::map<std::string, double> centers;
  std::string outcome;
  /// Linear predictor of the training rows at the end of fitting.
  Eigen::VectorXd eta;

  bool term_selected(const std::string& term_id) const;
};

/// Training data bound to a term set: shared frames, outcome and weights.
struct ModelData {
  std::shared_ptr<const TermSet> terms;
  std::shared_ptr<const std::vector<LearnerFrame>> frames;
  std::vector<double> y;
  std::vector<double> weights;

  std::size_t n_rows() const { return y.size(); }
};

ModelData make_model_data(const TermSet& terms, const Dataset& ds, std::vector<double> y);

/// Drives boosting on one weight vector over the shared frames. Learners are
/// prepared with the weights normalized to mean 1 over rows with positive
/// weight; risks are reported on the weights as given.
class Booster {
 public:
  Booster(const ModelData& data, std::vector<double> weights, BoostOptions options);

  void step();
  void run(std::size_t iterations);
  /// Steps until `q` distinct selectable terms have entered or `max_iterations`
  /// is reached. Returns true if q was reached.
  bool run_until_terms(std::size_t q, std::size_t max_iterations);

  /// Additionally tracks the risk on these weights after every step.
  void track_evaluation(std::vector<double> weights);

  const BoostState& state() const { return state_; }
  const std::vector<double>& risk_path() const { return risk_path_; }
  const std::vector<double>& evaluation_risk() const { return evaluation_risk_; }
  const std::vector<PreparedLearner>& learners() const { return learners_; }
  const std::vector<double>& fit_weights() const { return fit_weights_; }
  std::vector<std::string> selected_terms() const;

  FittedModel model() const;

 private:
  void record_risk();

  ModelData data_;
  std::vector<double> weights_;
  std::vector<double> fit_weights_;
  BoostOptions options_;
  std::vector<PreparedLearner> learners_;
  BoostState state_;
  std::vector<double> risk_path_;
  std::vector<double> evaluation_weights_;
  std::vector<double> evaluation_risk_;
  std::vector<bool> term_seen_;
  std::vector<std::size_t> term_of_learner_;
  std::vector<std::string> selection_order_;
};

/// Fits m_stop iterations on the full data with its own weights.
FittedModel fit(const ModelData& data, std::size_t m_stop, const BoostOptions& options = {});

/// Outcome 0/1 from a categorical column (positive levels) or a numeric 0/1 column.
struct OutcomeSpec {
  std::string column;
  std::vector<std::string> positive;
};
std::vector<double> binary_outcome(const Dataset& ds, const OutcomeSpec& outcome);

Eigen::VectorXd linear_predictor(const FittedModel& model, const Dataset& ds);
/// Phi of the additive predictor on new rows.
std::vector<double> predict(const FittedModel& model, const Dataset& ds);

// ---------------------------------------------------------------------------
// Partial effects

/// Evaluation points of one term: `x` (and `y` for surfaces) on the original
/// covariate scale, or `levels` for categorical, linear and random terms.
struct EffectGrid {
  std::vector<double> x;
  std::vector<double> y;
  std::vector<std::string> levels;

  std::size_t size() const { return levels.empty() ? x.size() : levels.size(); }
};

struct PartialEffect {
  std::string term_id;
  std::string label;
  TermType type = TermType::smooth;
  std::vector<std::string> axes;
  EffectGrid grid;
  std::vector<double> estimate;
  std::vector<double> lower;
  std::vector<double> upper;
  double level = 0.95;
};

/// Equidistant grid over the training range (points per axis for surfaces),
/// or the level list for indicator terms.
EffectGrid default_grid(const FittedModel& model, const std::string& term_id,
                        std::size_t points = 50);

/// Contribution of one term to eta on the grid; all other terms excluded.
PartialEffect partial_effect(const FittedModel& model, const std::string& term_id,
                             const EffectGrid& grid);

// ---------------------------------------------------------------------------
// Coefficient table

struct CoefficientRow {
  std::string term_id;
  std::string level;
  std::string factor;
  double estimate = 0.0;
  double ci_low = std::numeric_limits<double>::quiet_NaN();
  double ci_high = std::numeric_limits<double>::quiet_NaN();
};

/// Scalar effects of the model: offset, intercept, categorical levels, linear
/// columns and slopes of centered linear parts (per unit of the covariate).
/// With include_zero = false only non-zero rows (and the offset) are kept.
std::vector<CoefficientRow> coefficient_rows(const FittedModel& model, bool include_zero);

void write_coefficient_table(std::span<const CoefficientRow> rows,
                             const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Serialization

inline constexpr int kModelFormatVersion = 1;

void save_model(const FittedModel& model, const std::filesystem::path& path);
std::string model_to_json(const FittedModel& model);
FittedModel model_from_json(const std::string& text);
FittedModel load_model(const std::filesystem::path& path);

}  // namespace pboost
