#pragma once

// Minibatch subset-selection strategies. Every strategy returns a Selection;
// unit weights mean plain averaging over the chosen subset.

#include <cstdint>
#include <deque>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sbp/gram.hpp"
#include "sbp/omp.hpp"

namespace sbp {

using Rng = std::mt19937_64;

/// Seeds an independent generator for (seed, stream) pairs.
Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0);

enum class StrategyKind { random, loss_based, grad_match, full };
enum class CdfSource { within_batch, rolling_buffer };

std::string_view to_string(StrategyKind kind);
std::string_view to_string(CdfSource source);
std::optional<StrategyKind> parse_strategy_kind(std::string_view name);
std::optional<CdfSource> parse_cdf_source(std::string_view name);

struct StrategyConfig {
  StrategyKind kind = StrategyKind::random;
  double fraction = 1.0;  // ρ
  CdfSource cdf_source = CdfSource::within_batch;
  std::size_t buffer_capacity = 0;  // R; 0 resolves to 8x the base batch
  bool clip_negative = true;
  bool pad_to_m = false;
  bool abs_correlation = false;

  void validate() const;
  bool operator==(const StrategyConfig&) const = default;
};

/// Ring of the most recent loss values; oldest entries are evicted first.
class LossBuffer {
 public:
  explicit LossBuffer(std::size_t capacity = 1024);

  void push(std::span<const double> losses);
  std::vector<double> contents() const { return {entries_.begin(), entries_.end()}; }
  std::size_t size() const { return entries_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return entries_.empty(); }

 private:
  std::size_t capacity_;
  std::deque<double> entries_;
};

/// m distinct positions drawn uniformly from [0, M), returned in ascending
/// order with unit weights.
Selection select_random(Index batch_size, Index m, Rng& rng);

/// CDF(l_i) = |{r ∈ reference : r ≤ l_i}| / |reference|.
std::vector<double> empirical_cdf(std::span<const double> losses,
                                  std::span<const double> reference);

/// Draws exactly m distinct positions from independent Bernoulli(p_i) trials
/// conditioned on m successes. p_i = 1 entries are always kept when there are
/// at most m of them; otherwise m of them are chosen uniformly. With fewer than
/// m positive entries, the rest is filled uniformly from the p_i = 0 ones.
std::vector<Index> conditional_bernoulli_sample(std::span<const double> probs,
                                                Index m, Rng& rng);

/// Loss-prioritized selection: keep probability p_i = CDF(l_i)^β with
/// β = M/m, sampled to exactly m points. With a rolling buffer the batch
/// losses are appended after the draw.
Selection select_loss_based(std::span<const double> losses, Index m,
                            const StrategyConfig& cfg, LossBuffer& buffer,
                            Rng& rng);

/// Optionally clips weights at zero, then rescales them to sum to |I|.
/// Returns false (weights untouched) when nothing positive is left.
bool normalize_weights(Selection& sel, bool clip_negative);

/// Gradient-matching selection over a last-layer Gram matrix. Weights are
/// clipped at zero (unless disabled) and rescaled to sum to |I|. Falls back to
/// select_random when OMP finds nothing or all weights clip away.
Selection select_grad_match(const GramMatrix<double>& k, Index m,
                            const StrategyConfig& cfg, Rng& rng);

/// Runs the strategy named by cfg.kind on one forward-pass tape.
Selection select_subset(const StrategyConfig& cfg, const BatchTape<double>& tape,
                        Index m, LossBuffer& buffer, Rng& rng);

}  // namespace sbp
