#pragma once

// Dense storage aliases and an incrementally grown Cholesky factor.

#include <Eigen/Dense>

#include <cmath>
#include <string>

#include "sbp/errors.hpp"

namespace sbp {

using Index = Eigen::Index;

template <typename Scalar>
using DenseMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using DenseVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Throws NonFiniteValue if any coefficient is NaN or infinite.
template <typename Derived>
void require_finite(const Eigen::DenseBase<Derived>& m, const char* what) {
  if (!m.allFinite()) {
    throw NonFiniteValue(std::string(what) + ": non-finite entry");
  }
}

/// Default relative singularity threshold of a Cholesky pivot.
inline constexpr double kDefaultPivotTol = 1e-12;

/// Lower-triangular factor L with L·Lᵀ = A, grown one row/column at a time.
///
/// Storage is preallocated for `capacity` rows so repeated appends inside a
/// greedy loop do not reallocate. Only the leading order()×order() block is
/// meaningful.
template <typename Scalar>
class LowerCholesky {
 public:
  LowerCholesky() = default;
  explicit LowerCholesky(Index capacity) : storage_(capacity, capacity) {}

  Index order() const { return order_; }

  auto factor() const { return storage_.topLeftCorner(order_, order_); }

  /// Dense copy of L·Lᵀ.
  DenseMatrix<Scalar> reconstruct() const {
    DenseMatrix<Scalar> l = factor().template triangularView<Eigen::Lower>();
    return l * l.transpose();
  }

  /// Borders the factored matrix with one row/column.
  ///
  /// `cross` holds the entries between the new index and the current ones,
  /// `diag` its self entry. Raises SingularUpdate if the new pivot
  /// diag - ‖L⁻¹cross‖² is not above pivot_tol·diag; the factor is left
  /// unchanged in that case.
  template <typename Derived>
  void append(const Eigen::MatrixBase<Derived>& cross, Scalar diag,
              Scalar pivot_tol = Scalar(kDefaultPivotTol)) {
    if (cross.size() != order_) {
      throw DimensionMismatch("cholesky_append: cross has length " +
                              std::to_string(cross.size()) + ", expected " +
                              std::to_string(order_));
    }
    if (!std::isfinite(diag) || !cross.allFinite()) {
      throw NonFiniteValue("cholesky_append: non-finite input");
    }
    DenseVector<Scalar> w = cross;
    if (order_ > 0) {
      factor().template triangularView<Eigen::Lower>().solveInPlace(w);
    }
    const Scalar pivot = diag - w.squaredNorm();
    if (!(diag > Scalar(0)) || pivot <= pivot_tol * diag) {
      throw SingularUpdate("cholesky_append: pivot " + std::to_string(pivot) +
                           " below tolerance (near-duplicate atom)");
    }
    grow_to(order_ + 1);
    storage_.row(order_).head(order_) = w.transpose();
    storage_(order_, order_) = std::sqrt(pivot);
    ++order_;
  }

 private:
  void grow_to(Index n) {
    if (storage_.rows() >= n) return;
    const Index cap = std::max<Index>(n, 2 * storage_.rows());
    DenseMatrix<Scalar> bigger = DenseMatrix<Scalar>::Zero(cap, cap);
    bigger.topLeftCorner(order_, order_) = factor();
    storage_.swap(bigger);
  }

  DenseMatrix<Scalar> storage_;
  Index order_ = 0;
};

/// Value-returning form of LowerCholesky::append.
template <typename Scalar, typename Derived>
LowerCholesky<Scalar> cholesky_append(
    const LowerCholesky<Scalar>& chol, const Eigen::MatrixBase<Derived>& cross,
    Scalar diag, Scalar pivot_tol = Scalar(kDefaultPivotTol)) {
  LowerCholesky<Scalar> out = chol;
  out.append(cross, diag, pivot_tol);
  return out;
}

/// Solves (L·Lᵀ)x = rhs by forward then backward substitution.
template <typename Scalar, typename Derived>
DenseVector<Scalar> solve_posdef(const LowerCholesky<Scalar>& chol,
                                 const Eigen::MatrixBase<Derived>& rhs) {
  if (rhs.size() != chol.order()) {
    throw DimensionMismatch("solve_posdef: rhs has length " +
                            std::to_string(rhs.size()) + ", factor order " +
                            std::to_string(chol.order()));
  }
  DenseVector<Scalar> x = rhs;
  const auto l = chol.factor().template triangularView<Eigen::Lower>();
  l.solveInPlace(x);
  l.transpose().solveInPlace(x);
  return x;
}

}  // namespace sbp
