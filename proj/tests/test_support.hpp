#pragma once

// Random instance generators and brute-force oracles shared by the tests.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "sbp/gram.hpp"
#include "sbp/model.hpp"
#include "sbp/omp.hpp"
#include "sbp/selection.hpp"

namespace sbp::testing {

inline DenseMatrix<double> gaussian(Index rows, Index cols, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  DenseMatrix<double> m(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) m(i, j) = g(rng);
  }
  return m;
}

inline BatchTape<double> random_tape(Index m, Index d, Index c, Rng& rng) {
  BatchTape<double> tape;
  tape.H = gaussian(m, d, rng);
  tape.P = gaussian(m, c, rng);
  tape.losses = gaussian(m, 1, rng).cwiseAbs();
  return tape;
}

inline DenseMatrix<double> random_spd(Index n, Rng& rng) {
  const DenseMatrix<double> a = gaussian(n, n + 2, rng);
  return a * a.transpose() + 0.1 * DenseMatrix<double>::Identity(n, n);
}

inline double max_rel_err(const DenseMatrix<double>& a, const DenseMatrix<double>& b) {
  const double scale = std::max(a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff());
  return scale == 0.0 ? 0.0 : (a - b).cwiseAbs().maxCoeff() / scale;
}

inline std::vector<int> random_labels(Index n, Index classes, Rng& rng) {
  std::uniform_int_distribution<int> d(0, static_cast<int>(classes) - 1);
  std::vector<int> y(n);
  for (auto& v : y) v = d(rng);
  return y;
}

inline Mlp random_mlp(std::vector<Index> widths, Rng& rng, Activation act = Activation::relu) {
  ModelSpec spec;
  spec.input_dim = widths.front();
  spec.num_classes = widths.back();
  spec.hidden.assign(widths.begin() + 1, widths.end() - 1);
  spec.activation = act;
  return Mlp::initialized(spec, rng);
}

/// Central finite differences of the mean loss over all parameters.
inline DenseVector<double> fd_gradient(Mlp net, const DenseMatrix<double>& x, const std::vector<int>& y,
                                       double h = 1e-5) {
  DenseVector<double> g(net.parameter_count());
  for (Index p = 0; p < g.size(); ++p) {
    const double keep = net.parameters()(p);
    net.parameters()(p) = keep + h;
    const double up = mean_loss(net, x, y);
    net.parameters()(p) = keep - h;
    const double down = mean_loss(net, x, y);
    net.parameters()(p) = keep;
    g(p) = (up - down) / (2.0 * h);
  }
  return g;
}

/// Average ranks (1-based), ties share the mean rank.
inline std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
    i = j + 1;
  }
  return r;
}

inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  const auto ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

/// Inclusion frequency of every position over `draws` loss-based selections.
inline std::vector<double> loss_inclusion_freq(const std::vector<double>& losses, Index m, int draws,
                                               std::uint64_t seed) {
  StrategyConfig cfg;
  cfg.kind = StrategyKind::loss_based;
  LossBuffer buffer(1);
  Rng rng = make_rng(seed);
  std::vector<double> freq(losses.size(), 0.0);
  for (int t = 0; t < draws; ++t) {
    const Selection s = select_loss_based(losses, m, cfg, buffer, rng);
    for (Index i : s.indices) freq[i] += 1.0;
  }
  for (auto& f : freq) f /= draws;
  return freq;
}

// Every greedy step of the explicit-vector OMP has a clear winner.
inline bool tie_free(const DenseMatrix<double>& a, const DenseVector<double>& b, Index m) {
  DenseVector<double> residual = b;
  std::vector<char> used(a.rows(), 0);
  for (Index step = 0; step < m; ++step) {
    if (step > 0) {
      const Selection prefix = omp_dense_oracle(a, b, step);
      if (prefix.size() < step) return true;
      DenseMatrix<double> basis(a.cols(), step);
      for (Index s = 0; s < step; ++s) basis.col(s) = a.row(prefix.indices[s]).transpose();
      residual = b - basis * prefix.weights;
      std::fill(used.begin(), used.end(), 0);
      for (Index i : prefix.indices) used[i] = 1;
    }
    const DenseVector<double> corr = a * residual;
    double first = -1e300, second = -1e300;
    for (Index i = 0; i < corr.size(); ++i) {
      if (used[i]) continue;
      if (corr(i) > first) {
        second = first;
        first = corr(i);
      } else if (corr(i) > second) {
        second = corr(i);
      }
    }
    if (first - second <= 1e-7 * std::max(1.0, std::abs(first))) return false;
  }
  return true;
}

}  // namespace sbp::testing
