#pragma once

// Gram matrix of last-layer gradients, computed from cached forward-pass
// quantities without ever materializing the per-example gradients.

#include <string>
#include <vector>

#include "sbp/linalg.hpp"

namespace sbp {

/// Forward-pass byproducts of one minibatch.
///
/// Row i of `H` is the input to the final linear layer for example i, row i
/// of `P` the gradient of that example's loss w.r.t. the layer's output.
template <typename Scalar>
struct BatchTape {
  DenseMatrix<Scalar> H;       // M x D
  DenseMatrix<Scalar> P;       // M x C
  DenseVector<Scalar> losses;  // M

  Index batch_size() const { return H.rows(); }
  Index input_width() const { return H.cols(); }
  Index output_width() const { return P.cols(); }

  void validate() const {
    if (P.rows() != H.rows() || losses.size() != H.rows()) {
      throw DimensionMismatch("BatchTape: H, P, losses disagree on M (" +
                              std::to_string(H.rows()) + ", " +
                              std::to_string(P.rows()) + ", " +
                              std::to_string(losses.size()) + ")");
    }
    require_finite(H, "BatchTape.H");
    require_finite(P, "BatchTape.P");
    require_finite(losses, "BatchTape.losses");
  }
};

template <typename Scalar>
using GramMatrix = DenseMatrix<Scalar>;

namespace detail {

// Copies the upper triangle onto the lower one.
template <typename Scalar>
void mirror_upper(GramMatrix<Scalar>& k) {
  for (Index j = 0; j < k.cols(); ++j) {
    for (Index i = j + 1; i < k.rows(); ++i) k(i, j) = k(j, i);
  }
}

}  // namespace detail

/// K = HHᵀ ∘ PPᵀ + PPᵀ. Pass with_bias = false for a head without a bias
/// vector, which drops the PPᵀ term.
template <typename Scalar>
GramMatrix<Scalar> gram_implicit(const BatchTape<Scalar>& tape,
                                 bool with_bias = true) {
  tape.validate();
  const Index m = tape.batch_size();
  GramMatrix<Scalar> pp(m, m);
  pp.template triangularView<Eigen::Upper>() = tape.P * tape.P.transpose();
  GramMatrix<Scalar> k(m, m);
  k.template triangularView<Eigen::Upper>() = tape.H * tape.H.transpose();
  for (Index j = 0; j < m; ++j) {
    for (Index i = 0; i <= j; ++i) {
      k(i, j) = with_bias ? pp(i, j) * (k(i, j) + Scalar(1))
                          : pp(i, j) * k(i, j);
    }
  }
  detail::mirror_upper(k);
  return k;
}

/// Flattened last-layer gradients, one row per example: the C×D block
/// p_i h_iᵀ in row-major order (entry (c, d) at c·D + d) followed by p_i.
template <typename Scalar>
DenseMatrix<Scalar> last_layer_gradients(const BatchTape<Scalar>& tape,
                                         bool with_bias = true) {
  tape.validate();
  const Index m = tape.batch_size();
  const Index d = tape.input_width();
  const Index c = tape.output_width();
  DenseMatrix<Scalar> g(m, c * d + (with_bias ? c : 0));
  for (Index i = 0; i < m; ++i) {
    for (Index a = 0; a < c; ++a) {
      for (Index b = 0; b < d; ++b) g(i, a * d + b) = tape.P(i, a) * tape.H(i, b);
    }
    if (with_bias) g.row(i).tail(c) = tape.P.row(i);
  }
  return g;
}

/// Gram matrix of the explicit last-layer gradient vectors. Costs
/// O(M²·C·D); kept as the reference for gram_implicit.
template <typename Scalar>
GramMatrix<Scalar> gram_explicit(const BatchTape<Scalar>& tape,
                                 bool with_bias = true) {
  const DenseMatrix<Scalar> g = last_layer_gradients(tape, with_bias);
  GramMatrix<Scalar> k(g.rows(), g.rows());
  k.template triangularView<Eigen::Upper>() = g * g.transpose();
  detail::mirror_upper(k);
  return k;
}

/// t_i = (1/M) Σ_j K_ij, i.e. the inner product of g_i with the mean gradient.
template <typename Derived>
DenseVector<typename Derived::Scalar> mean_correlations(
    const Eigen::MatrixBase<Derived>& k) {
  if (k.rows() != k.cols()) {
    throw DimensionMismatch("mean_correlations: K is not square");
  }
  return k.rowwise().mean();
}

}  // namespace sbp
