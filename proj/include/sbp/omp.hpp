#pragma once

// Orthogonal matching pursuit, Gram-matrix form plus an explicit-vector
// reference implementation.

#include <algorithm>
#include <limits>
#include <string>
#include <vector>

#include "sbp/gram.hpp"
#include "sbp/linalg.hpp"

namespace sbp {

/// Chosen minibatch positions and their weights, aligned index by index.
template <typename Scalar>
struct BasicSelection {
  std::vector<Index> indices;
  DenseVector<Scalar> weights;
  // Set when a strategy could not produce its own subset and substituted a
  // uniformly random one.
  bool fallback = false;

  Index size() const { return static_cast<Index>(indices.size()); }
};

using Selection = BasicSelection<double>;

struct OmpConfig {
  Index max_atoms = 1;
  double residual_tol = 0.0;
  double pivot_tol = kDefaultPivotTol;
  // Rank atoms by |α| instead of the raw correlation.
  bool abs_correlation = false;
};

namespace detail {

// argmax over positions not yet taken; lowest index wins ties.
template <typename Scalar>
Index best_unused(const DenseVector<Scalar>& score,
                  const std::vector<char>& used, Scalar& best) {
  Index arg = -1;
  best = -std::numeric_limits<Scalar>::infinity();
  for (Index i = 0; i < score.size(); ++i) {
    if (!used[i] && score(i) > best) {
      best = score(i);
      arg = i;
    }
  }
  return arg;
}

inline void check_omp_config(const OmpConfig& cfg, Index m) {
  if (cfg.max_atoms < 1 || cfg.max_atoms > m) {
    throw DimensionMismatch("omp: max_atoms " + std::to_string(cfg.max_atoms) +
                            " outside [1, " + std::to_string(m) + "]");
  }
  if (cfg.residual_tol < 0 || cfg.pivot_tol < 0) {
    throw DimensionMismatch("omp: tolerances must be non-negative");
  }
}

}  // namespace detail

/// Greedy sparse fit of the target correlations t = Aᵀb given only K = AᵀA.
///
/// Each round picks the unused atom with the largest residual correlation α,
/// refits γ = K_II⁻¹ t_I through an incrementally bordered Cholesky factor
/// and sets α = t - K_:I γ. Stops at max_atoms, when the best correlation is
/// at or below residual_tol, or when the next atom is numerically dependent on
/// the chosen ones. Weights are the raw least-squares coefficients.
template <typename DerivedK, typename DerivedT>
BasicSelection<typename DerivedK::Scalar> omp_gram(
    const Eigen::MatrixBase<DerivedK>& k, const Eigen::MatrixBase<DerivedT>& t,
    const OmpConfig& cfg) {
  using Scalar = typename DerivedK::Scalar;
  const Index m = k.rows();
  if (k.cols() != m || t.size() != m) {
    throw DimensionMismatch("omp_gram: K is " + std::to_string(k.rows()) + "x" +
                            std::to_string(k.cols()) + ", t has length " +
                            std::to_string(t.size()));
  }
  detail::check_omp_config(cfg, m);

  BasicSelection<Scalar> sel;
  sel.indices.reserve(cfg.max_atoms);
  std::vector<char> used(m, 0);
  LowerCholesky<Scalar> chol(cfg.max_atoms);
  DenseVector<Scalar> alpha = t;
  DenseVector<Scalar> gamma;
  DenseVector<Scalar> cross(cfg.max_atoms);
  DenseVector<Scalar> t_active(cfg.max_atoms);

  while (sel.size() < cfg.max_atoms) {
    Scalar best;
    const Index pick = cfg.abs_correlation
                           ? detail::best_unused<Scalar>(alpha.cwiseAbs(), used, best)
                           : detail::best_unused<Scalar>(alpha, used, best);
    if (pick < 0 || best <= Scalar(cfg.residual_tol)) break;

    const Index n = sel.size();
    for (Index a = 0; a < n; ++a) cross(a) = k(sel.indices[a], pick);
    try {
      chol.append(cross.head(n), k(pick, pick), Scalar(cfg.pivot_tol));
    } catch (const SingularUpdate&) {
      break;
    }
    sel.indices.push_back(pick);
    used[pick] = 1;
    t_active(n) = t(pick);

    gamma = solve_posdef(chol, t_active.head(n + 1));
    alpha = t;
    for (Index a = 0; a <= n; ++a) alpha.noalias() -= gamma(a) * k.col(sel.indices[a]);
  }

  if (sel.indices.empty()) {
    throw EmptySelection("omp_gram: no atom has positive correlation with the target");
  }
  sel.weights = gamma;
  return sel;
}

/// Textbook OMP on explicit atoms (rows of `atoms`) matching `target`.
/// Correlations use the residual directly and every step solves the
/// least-squares refit by pivoted QR. Intended as a reference for omp_gram.
template <typename DerivedA, typename DerivedB>
BasicSelection<typename DerivedA::Scalar> omp_dense_oracle(
    const Eigen::MatrixBase<DerivedA>& atoms,
    const Eigen::MatrixBase<DerivedB>& target, Index max_atoms,
    const OmpConfig& cfg = {}) {
  using Scalar = typename DerivedA::Scalar;
  const Index m = atoms.rows();
  if (target.size() != atoms.cols()) {
    throw DimensionMismatch("omp_dense_oracle: target length mismatch");
  }
  OmpConfig c = cfg;
  c.max_atoms = max_atoms;
  detail::check_omp_config(c, m);

  BasicSelection<Scalar> sel;
  std::vector<char> used(m, 0);
  const DenseVector<Scalar> b = target;
  DenseVector<Scalar> residual = b;
  DenseVector<Scalar> gamma;

  while (sel.size() < max_atoms) {
    DenseVector<Scalar> corr = atoms * residual;
    if (c.abs_correlation) corr = corr.cwiseAbs();
    Scalar best;
    const Index pick = detail::best_unused<Scalar>(corr, used, best);
    if (pick < 0 || best <= Scalar(c.residual_tol)) break;

    DenseMatrix<Scalar> basis(atoms.cols(), sel.size() + 1);
    for (Index a = 0; a < sel.size(); ++a) basis.col(a) = atoms.row(sel.indices[a]).transpose();
    basis.col(sel.size()) = atoms.row(pick).transpose();

    // Reject an atom that is (numerically) in the span of the chosen ones.
    const DenseVector<Scalar> candidate = basis.col(sel.size());
    if (sel.size() > 0) {
      const auto prev = basis.leftCols(sel.size());
      const DenseVector<Scalar> coef = prev.colPivHouseholderQr().solve(candidate);
      const Scalar left = (candidate - prev * coef).squaredNorm();
      if (left <= Scalar(c.pivot_tol) * candidate.squaredNorm()) break;
    } else if (!(candidate.squaredNorm() > Scalar(0))) {
      break;
    }

    sel.indices.push_back(pick);
    used[pick] = 1;
    gamma = basis.colPivHouseholderQr().solve(b);
    residual = b - basis * gamma;
  }

  if (sel.indices.empty()) {
    throw EmptySelection("omp_dense_oracle: no atom has positive correlation with the target");
  }
  sel.weights = gamma;
  return sel;
}

/// ‖Σ_{i∈I} γ_i g_i - ḡ‖² evaluated from inner products only:
/// γᵀK_IIγ - 2γᵀt_I + t0, where t0 = ‖ḡ‖² (the mean of t).
template <typename DerivedK, typename DerivedT>
typename DerivedK::Scalar residual_norm_sq(
    const Eigen::MatrixBase<DerivedK>& k, const Eigen::MatrixBase<DerivedT>& t,
    typename DerivedK::Scalar t0,
    const BasicSelection<typename DerivedK::Scalar>& sel) {
  using Scalar = typename DerivedK::Scalar;
  const Index n = sel.size();
  if (sel.weights.size() != n) {
    throw DimensionMismatch("residual_norm_sq: weights and indices disagree");
  }
  Scalar quad = 0;
  Scalar lin = 0;
  for (Index a = 0; a < n; ++a) {
    const Index ia = sel.indices[a];
    lin += sel.weights(a) * t(ia);
    for (Index b = 0; b < n; ++b) {
      quad += sel.weights(a) * k(ia, sel.indices[b]) * sel.weights(b);
    }
  }
  return quad - Scalar(2) * lin + t0;
}

}  // namespace sbp
