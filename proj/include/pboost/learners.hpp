#pragma once

// Penalized least-squares base learners of the additive probit predictor.
//
// Every learner has the effective design X = B T - C P, where B is a sparse
// basis (spline, tensor, indicator or raw columns), T maps onto the penalized
// subspace of the difference penalty (identity when absent), C holds the
// constraint columns ([1], [1, x], or those scaled by an interaction
// indicator), and P is the weighted projection of B T onto C. After this
// reparameterization every penalized learner carries an identity penalty.

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pboost/basis.hpp"
#include "pboost/table.hpp"

namespace pboost {

enum class LearnerKind {
  intercept,
  linear,
  linear_categorical,
  smooth_linear,
  smooth_nonlinear,
  varying_coefficient,
  tensor_surface,
  spatial_surface,
  random_intercept,
};

enum class LearnerPart { whole, linear, nonlinear };

enum class Constraint { none, constant, constant_linear };

std::string to_string(LearnerKind kind);
LearnerKind learner_kind_from_string(const std::string& text);
std::string to_string(LearnerPart part);
LearnerPart learner_part_from_string(const std::string& text);

enum class TermType { linear, categorical, smooth, interaction, surface, spatial, random };

std::string to_string(TermType type);
TermType term_type_from_string(const std::string& text);

/// One entry of the ordered model term list.
struct TermSpec {
  std::string id;
  std::string label;
  TermType type = TermType::smooth;
  std::vector<std::string> columns;
  std::string by;        ///< interaction modifier (categorical)
  std::string by_level;  ///< modifier level the smooth is active for
  std::string reference; ///< categorical reference override
  std::optional<int> inner_knots;
  std::optional<int> degree;
  std::optional<double> df;
};

struct ModelFormula {
  std::vector<TermSpec> terms;
  int inner_knots = 20;
  int degree = 3;
  int surface_inner_knots = 20;
  int surface_degree = 1;
  double df = 1.0;
};

/// Weight-independent recipe of a learner; rebuilds its basis on any dataset.
struct LearnerSpec {
  std::string id;
  std::string term_id;
  std::string label;
  LearnerKind kind = LearnerKind::intercept;
  LearnerPart part = LearnerPart::whole;
  std::vector<std::string> columns;
  std::string by_column;
  std::string by_level;
  std::vector<std::string> levels;  ///< categorical and random-intercept columns
  std::size_t reference = 0;        ///< categorical only
  std::vector<KnotGrid> grids;
  Eigen::MatrixXd transform;        ///< empty means identity
  Constraint constraint = Constraint::none;
  bool penalized = false;
  double df_target = 1.0;

  /// Labels of the basis columns for indicator learners.
  std::vector<std::string> column_levels() const;
};

struct TermInfo {
  std::string id;
  std::string label;
  TermType type = TermType::linear;
  std::vector<std::string> columns;
  std::string by;
  std::string by_level;
  std::vector<std::size_t> learners;
  bool selectable = true;  ///< false for the intercept
};

/// The learners of a model formula. Learner 0 is always the intercept.
struct TermSet {
  ModelFormula formula;
  std::vector<TermInfo> terms;
  std::vector<LearnerSpec> learners;

  const TermInfo& term(const std::string& id) const;
  std::size_t selectable_terms() const;
};

TermSet build_term_set(const ModelFormula& formula, const Dataset& ds);

/// Basis and constraint columns of one learner materialized on a dataset.
struct LearnerFrame {
  SparseMatrix basis;
  Eigen::MatrixXd constraints;
};

LearnerFrame make_frame(const LearnerSpec& spec, const Dataset& ds);
std::vector<LearnerFrame> make_frames(const TermSet& terms, const Dataset& ds);

/// Projection P of B T onto the constraint columns under weights w.
Eigen::MatrixXd constraint_projection(const LearnerSpec& spec, const LearnerFrame& frame,
                                      std::span<const double> w);

/// (B T - C P) beta without forming the dense design.
Eigen::VectorXd apply_design(const LearnerSpec& spec, const LearnerFrame& frame,
                             const Eigen::MatrixXd& projection, const Eigen::VectorXd& beta);

/// Dense effective design B T - C P.
Eigen::MatrixXd effective_design(const LearnerSpec& spec, const LearnerFrame& frame,
                                 const Eigen::MatrixXd& projection);

// ---------------------------------------------------------------------------
// Reference (dense) penalized least squares

/// A dense learner: design, penalty (empty = unpenalized) and strength.
struct BaseLearner {
  std::string id;
  LearnerKind kind = LearnerKind::linear;
  Eigen::MatrixXd design;
  Eigen::MatrixXd penalty;
  double lambda = 0.0;
  double df_target = 1.0;
  std::string term_label;
};

struct FitResult {
  Eigen::VectorXd coefficients;
  Eigen::VectorXd fitted;
  double weighted_rss = 0.0;
};

/// coefficients = (X'WX + lambda K)^{-1} X'Wu. Throws NumericalError when the
/// system is singular.
FitResult fit_penalized_ls(const BaseLearner& bl, std::span<const double> u,
                           std::span<const double> w);

/// Trace of the weighted hat matrix X (X'WX + lambda K)^{-1} X'W.
double hat_trace_df(const BaseLearner& bl, double lambda, std::span<const double> w);

/// Bisection on log(lambda) until the hat trace matches df_target.
double calibrate_lambda_for_df(const BaseLearner& bl, double df_target, std::span<const double> w);

// ---------------------------------------------------------------------------
// Fast learners for the boosting loop

/// A learner bound to one weight vector: projection, eigendecomposition of the
/// effective X'WX and calibrated lambda. Weights are used as given; callers
/// normalize them.
class PreparedLearner {
 public:
  PreparedLearner(const LearnerSpec& spec, const LearnerFrame& frame, std::span<const double> w);

  const LearnerSpec& spec() const { return *spec_; }
  const LearnerFrame& frame() const { return *frame_; }
  const Eigen::MatrixXd& projection() const { return projection_; }
  double lambda() const { return lambda_; }
  Eigen::Index width() const { return eigenvalues_.size(); }
  int rank() const;

  /// Hat-matrix trace at a given lambda.
  double df(double lambda) const;

  /// X' v
  Eigen::VectorXd crossprod(const Eigen::VectorXd& v) const;
  /// X beta
  Eigen::VectorXd apply(const Eigen::VectorXd& beta) const;

  struct Update {
    Eigen::VectorXd coefficients;
    double weighted_rss = 0.0;
  };
  /// Penalized LS fit to u given wu = w .* u and wuu = sum w u^2.
  Update fit(const Eigen::VectorXd& wu, double wuu) const;
  /// Weighted RSS only, skipping the coefficient back-transform.
  double rss(const Eigen::VectorXd& wu, double wuu) const;

  /// Dense equivalent for the reference path.
  BaseLearner materialize() const;

 private:
  Eigen::VectorXd eigen_coefficients(const Eigen::VectorXd& s) const;

  const LearnerSpec* spec_;
  const LearnerFrame* frame_;
  Eigen::MatrixXd projection_;
  Eigen::VectorXd eigenvalues_;
  Eigen::MatrixXd eigenvectors_;  ///< empty in diagonal mode
  double tolerance_ = 0.0;
  double lambda_ = 0.0;
};

/// Prepares every learner of a term set for one weight vector.
std::vector<PreparedLearner> prepare_learners(const TermSet& terms,
                                              const std::vector<LearnerFrame>& frames,
                                              std::span<const double> w);

}  // namespace pboost
