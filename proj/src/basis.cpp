#include "pboost/basis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

#include "pboost/error.hpp"
#include "pboost/log.hpp"

namespace pboost {
namespace {

const char* const kModule = "basis";

// Nonzero basis values at x (degree + 1 entries) and the index of the first.
int basis_row(double x, const KnotGrid& grid, double* values) {
  const int p = grid.degree;
  const double h = grid.spacing();
  int cell = static_cast<int>(std::floor((x - grid.lo) / h));
  cell = std::clamp(cell, 0, grid.inner_knots);
  const int span = cell + p;
  auto knot = [&](int j) { return grid.lo + (j - p) * h; };

  double left[16];
  double right[16];
  values[0] = 1.0;
  for (int j = 1; j <= p; ++j) {
    left[j] = x - knot(span + 1 - j);
    right[j] = knot(span + j) - x;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double temp = values[r] / (right[r + 1] + left[j - r]);
      values[r] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    values[j] = saved;
  }
  // Knot positions are recomputed from lo and h, so x can sit a rounding error
  // outside its cell; the resulting values are of order -1e-17.
  for (int j = 0; j <= p; ++j) values[j] = std::max(values[j], 0.0);
  return cell;
}

void check_grid(const KnotGrid& grid) {
  if (!(grid.hi > grid.lo)) throw DataError(kModule, "degenerate covariate range (min = max)");
  if (grid.inner_knots < 0) throw ConfigError(kModule, "inner_knots must be non-negative");
  if (grid.degree < 0 || grid.degree > 14) throw ConfigError(kModule, "degree must be in [0, 14]");
}

double clamp_to(const KnotGrid& grid, double x, std::size_t& clamped) {
  if (x < grid.lo || x > grid.hi) {
    ++clamped;
    return std::clamp(x, grid.lo, grid.hi);
  }
  return x;
}

void report_clamped(std::size_t clamped, const KnotGrid& grid) {
  if (clamped == 0) return;
  log::warn(kModule, std::to_string(clamped) + " value(s) outside [" + std::to_string(grid.lo) +
                         ", " + std::to_string(grid.hi) + "] clamped to the boundary");
}

}  // namespace

KnotGrid KnotGrid::over(std::span<const double> x, int inner_knots, int degree) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (double v : x) {
    if (std::isnan(v)) continue;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  KnotGrid grid{inner_knots, degree, lo, hi};
  if (!std::isfinite(lo)) throw DataError(kModule, "covariate has no observed values");
  check_grid(grid);
  return grid;
}

std::vector<double> KnotGrid::expanded_knots() const {
  const int count = inner_knots + 2 * (degree + 1);
  std::vector<double> knots(static_cast<std::size_t>(count));
  const double h = spacing();
  for (int j = 0; j < count; ++j) knots[static_cast<std::size_t>(j)] = lo + (j - degree) * h;
  return knots;
}

Eigen::MatrixXd bspline_design(std::span<const double> x, const KnotGrid& grid) {
  return Eigen::MatrixXd(bspline_basis(x, grid));
}

SparseMatrix bspline_basis(std::span<const double> x, const KnotGrid& grid) {
  check_grid(grid);
  const int p = grid.degree;
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(x.size() * static_cast<std::size_t>(p + 1));
  double values[16];
  std::size_t clamped = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = clamp_to(grid, x[i], clamped);
    const int first = basis_row(xi, grid, values);
    for (int k = 0; k <= p; ++k) {
      if (values[k] != 0.0) {
        triplets.emplace_back(static_cast<int>(i), first + k, values[k]);
      }
    }
  }
  report_clamped(clamped, grid);
  SparseMatrix B(static_cast<Eigen::Index>(x.size()), grid.n_basis());
  B.setFromTriplets(triplets.begin(), triplets.end());
  return B;
}

Eigen::MatrixXd difference_matrix(int m, int d) {
  if (d < 1 || m <= d) {
    throw DataError(kModule, "difference penalty needs m > d >= 1 (m = " + std::to_string(m) +
                                 ", d = " + std::to_string(d) + ")");
  }
  Eigen::MatrixXd D = Eigen::MatrixXd::Identity(m, m);
  for (int k = 0; k < d; ++k) {
    D = (D.bottomRows(D.rows() - 1) - D.topRows(D.rows() - 1)).eval();
  }
  return D;
}

PenaltyMatrix difference_penalty(int m, int d) {
  const Eigen::MatrixXd D = difference_matrix(m, d);
  return {d, D.transpose() * D};
}

SparseMatrix row_kronecker(const SparseMatrix& a, const SparseMatrix& b) {
  if (a.rows() != b.rows()) throw DataError(kModule, "row_kronecker: row counts differ");
  using RowMajor = Eigen::SparseMatrix<double, Eigen::RowMajor>;
  const RowMajor ar = a;
  const RowMajor br = b;
  std::vector<Eigen::Triplet<double>> triplets;
  for (Eigen::Index i = 0; i < ar.rows(); ++i) {
    for (RowMajor::InnerIterator ia(ar, i); ia; ++ia) {
      for (RowMajor::InnerIterator ib(br, i); ib; ++ib) {
        triplets.emplace_back(static_cast<int>(i),
                              static_cast<int>(ia.col() * b.cols() + ib.col()),
                              ia.value() * ib.value());
      }
    }
  }
  SparseMatrix out(a.rows(), a.cols() * b.cols());
  out.setFromTriplets(triplets.begin(), triplets.end());
  return out;
}

Eigen::MatrixXd penalized_subspace(const Eigen::MatrixXd& K) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(K);
  if (eig.info() != Eigen::Success) throw NumericalError(kModule, "penalty eigendecomposition failed");
  const Eigen::VectorXd& values = eig.eigenvalues();
  const double tol = 1e-10 * std::max(1.0, values.cwiseAbs().maxCoeff());
  std::vector<Eigen::Index> keep;
  for (Eigen::Index k = 0; k < values.size(); ++k) {
    if (values(k) > tol) keep.push_back(k);
  }
  Eigen::MatrixXd T(K.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t c = 0; c < keep.size(); ++c) {
    const auto k = keep[c];
    T.col(static_cast<Eigen::Index>(c)) = eig.eigenvectors().col(k) / std::sqrt(values(k));
  }
  return T;
}

DecomposedDesign decompose_pspline(const Eigen::MatrixXd& design, const PenaltyMatrix& penalty,
                                   std::span<const double> x, std::span<const double> w) {
  if (penalty.order != 2) {
    throw ConfigError(kModule, "decomposition requires a second-order difference penalty");
  }
  const auto n = static_cast<Eigen::Index>(x.size());
  if (design.rows() != n || static_cast<Eigen::Index>(w.size()) != n) {
    throw DataError(kModule, "decompose_pspline: dimension mismatch");
  }
  const Eigen::Map<const Eigen::VectorXd> xv(x.data(), n);
  const Eigen::Map<const Eigen::VectorXd> wv(w.data(), n);
  if (xv.maxCoeff() == xv.minCoeff()) throw DataError(kModule, "degenerate covariate range (min = max)");

  Eigen::MatrixXd C(n, 2);
  C.col(0).setOnes();
  C.col(1) = xv;
  const Eigen::MatrixXd ctwc = C.transpose() * wv.asDiagonal() * C;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(ctwc);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ctwc.determinant() <= 0.0) {
    throw DataError(kModule, "weighted covariate has no spread; cannot separate linear part");
  }

  DecomposedDesign out;
  out.transform = penalized_subspace(penalty.K);
  const Eigen::MatrixXd Z = design * out.transform;
  out.projection = ldlt.solve(C.transpose() * wv.asDiagonal() * Z);
  out.nonlinear_part = Z - C * out.projection;
  out.constant_part = Eigen::VectorXd::Ones(n);
  const double center = wv.dot(xv) / wv.sum();
  out.linear_part = xv.array() - center;
  out.penalty = Eigen::MatrixXd::Identity(out.transform.cols(), out.transform.cols());

  const Eigen::MatrixXd scaled = wv.cwiseSqrt().asDiagonal() * out.nonlinear_part;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(scaled);
  qr.setThreshold(1e-10);
  if (qr.rank() < out.nonlinear_part.cols()) {
    throw DataError(kModule, "nonlinear design is rank deficient after reparameterization (rank " +
                                 std::to_string(qr.rank()) + " < " +
                                 std::to_string(out.nonlinear_part.cols()) + ")");
  }
  return out;
}

PenaltyMatrix kronecker_sum_penalty(int m1, int m2, int difference_order) {
  const Eigen::MatrixXd K1 = difference_penalty(m1, difference_order).K;
  const Eigen::MatrixXd K2 = difference_penalty(m2, difference_order).K;
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(m1 * m2, m1 * m2);
  for (int a = 0; a < m1; ++a) {
    for (int b = 0; b < m1; ++b) {
      if (K1(a, b) == 0.0) continue;
      for (int c = 0; c < m2; ++c) K(a * m2 + c, b * m2 + c) += K1(a, b);
    }
  }
  for (int a = 0; a < m1; ++a) K.block(a * m2, a * m2, m2, m2) += K2;
  return {difference_order, K};
}

TensorDesign tensor_product_design(std::span<const double> x1, std::span<const double> x2,
                                   const KnotGrid& grid1, const KnotGrid& grid2,
                                   int difference_order) {
  if (x1.size() != x2.size()) throw DataError(kModule, "tensor_product_design: length mismatch");
  const SparseMatrix B = row_kronecker(bspline_basis(x1, grid1), bspline_basis(x2, grid2));
  return {Eigen::MatrixXd(B),
          kronecker_sum_penalty(grid1.n_basis(), grid2.n_basis(), difference_order)};
}

}  // namespace pboost
