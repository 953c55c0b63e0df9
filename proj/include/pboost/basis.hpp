#pragma once

// B-spline design matrices, difference penalties, tensor products and the
// constant/linear/nonlinear decomposition of P-spline smooths.

#include <span>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

namespace pboost {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Equidistant knots over [lo, hi] with `degree` extra knots beyond each
/// boundary, the usual P-spline layout.
struct KnotGrid {
  int inner_knots = 20;
  int degree = 3;
  double lo = 0.0;
  double hi = 1.0;

  /// Grid spanning the non-missing values of x. Throws on a degenerate range.
  static KnotGrid over(std::span<const double> x, int inner_knots = 20, int degree = 3);

  int n_basis() const { return inner_knots + degree + 1; }
  double spacing() const { return (hi - lo) / (inner_knots + 1); }
  /// Full knot vector, length inner_knots + 2 (degree + 1).
  std::vector<double> expanded_knots() const;
};

struct PenaltyMatrix {
  int order = 2;
  Eigen::MatrixXd K;
};

/// Dense n x n_basis design. Points outside [lo, hi] are clamped with a warning.
Eigen::MatrixXd bspline_design(std::span<const double> x, const KnotGrid& grid);
/// Same design in sparse form (at most degree + 1 nonzeros per row).
SparseMatrix bspline_basis(std::span<const double> x, const KnotGrid& grid);

/// K = D'D for the d-th order difference operator D ((m - d) x m).
PenaltyMatrix difference_penalty(int m, int d);
Eigen::MatrixXd difference_matrix(int m, int d);

/// Row-wise Kronecker product: row i of the result is kron(a_i, b_i).
SparseMatrix row_kronecker(const SparseMatrix& a, const SparseMatrix& b);

/// Columns of Gamma_+ diag(e_+)^{-1/2} for the strictly positive eigenpairs of
/// K; mapping coefficients through it turns the penalty into the identity on
/// the penalized subspace.
Eigen::MatrixXd penalized_subspace(const Eigen::MatrixXd& K);

struct DecomposedDesign {
  Eigen::VectorXd constant_part;
  Eigen::VectorXd linear_part;      ///< x minus its weighted mean
  Eigen::MatrixXd nonlinear_part;   ///< weighted-orthogonal to [1, x]
  Eigen::MatrixXd transform;        ///< spline coefficients per nonlinear coefficient
  Eigen::MatrixXd projection;       ///< 2 x r coefficients of [1, x] removed from design*transform
  Eigen::MatrixXd penalty;          ///< identity on the nonlinear coefficients
};

DecomposedDesign decompose_pspline(const Eigen::MatrixXd& design, const PenaltyMatrix& penalty,
                                   std::span<const double> x, std::span<const double> w);

struct TensorDesign {
  Eigen::MatrixXd design;
  PenaltyMatrix penalty;
};

/// Bivariate tensor-product P-spline: design = row-wise Kronecker of the
/// marginal bases, penalty = K1 (x) I + I (x) K2 with first-order differences.
TensorDesign tensor_product_design(std::span<const double> x1, std::span<const double> x2,
                                   const KnotGrid& grid1, const KnotGrid& grid2,
                                   int difference_order = 1);

/// Kronecker-sum penalty for marginal widths m1, m2.
PenaltyMatrix kronecker_sum_penalty(int m1, int m2, int difference_order);

}  // namespace pboost
