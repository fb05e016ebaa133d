#include "sbp/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace sbp {

Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32), 0x5eedu};
  return Rng(seq);
}

std::string_view to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::random: return "random";
    case StrategyKind::loss_based: return "loss_based";
    case StrategyKind::grad_match: return "grad_match";
    case StrategyKind::full: return "full";
  }
  return "?";
}

std::string_view to_string(CdfSource source) {
  return source == CdfSource::within_batch ? "within_batch" : "rolling_buffer";
}

std::optional<StrategyKind> parse_strategy_kind(std::string_view name) {
  if (name == "random") return StrategyKind::random;
  if (name == "loss_based" || name == "loss") return StrategyKind::loss_based;
  if (name == "grad_match") return StrategyKind::grad_match;
  if (name == "full") return StrategyKind::full;
  return std::nullopt;
}

std::optional<CdfSource> parse_cdf_source(std::string_view name) {
  if (name == "within_batch") return CdfSource::within_batch;
  if (name == "rolling_buffer") return CdfSource::rolling_buffer;
  return std::nullopt;
}

void StrategyConfig::validate() const {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw BadFraction("strategy fraction must lie in (0, 1], got " +
                      std::to_string(fraction));
  }
}

LossBuffer::LossBuffer(std::size_t capacity) : capacity_(std::max<std::size_t>(capacity, 1)) {}

void LossBuffer::push(std::span<const double> losses) {
  for (double l : losses) {
    if (entries_.size() == capacity_) entries_.pop_front();
    entries_.push_back(l);
  }
}

namespace {

void check_subset_size(Index batch_size, Index m) {
  if (m < 1) throw BadFraction("subset size must be at least 1");
  if (m > batch_size) {
    throw BadFraction("subset size " + std::to_string(m) + " exceeds batch size " +
                      std::to_string(batch_size));
  }
}

// m distinct entries of `pool` by partial Fisher-Yates.
std::vector<Index> draw_without_replacement(std::vector<Index> pool, Index m, Rng& rng) {
  for (Index i = 0; i < m; ++i) {
    std::uniform_int_distribution<Index> pick(i, static_cast<Index>(pool.size()) - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(m);
  std::sort(pool.begin(), pool.end());
  return pool;
}

double log_add(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

Selection unit_selection(std::vector<Index> indices) {
  Selection sel;
  sel.weights = DenseVector<double>::Ones(static_cast<Index>(indices.size()));
  sel.indices = std::move(indices);
  return sel;
}

}  // namespace

Selection select_random(Index batch_size, Index m, Rng& rng) {
  check_subset_size(batch_size, m);
  std::vector<Index> all(batch_size);
  std::iota(all.begin(), all.end(), Index{0});
  return unit_selection(draw_without_replacement(std::move(all), m, rng));
}

std::vector<double> empirical_cdf(std::span<const double> losses,
                                  std::span<const double> reference) {
  if (reference.empty()) throw DimensionMismatch("empirical_cdf: empty reference");
  std::vector<double> sorted(reference.begin(), reference.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  std::vector<double> out;
  out.reserve(losses.size());
  for (double l : losses) {
    const auto rank = std::upper_bound(sorted.begin(), sorted.end(), l) - sorted.begin();
    out.push_back(static_cast<double>(rank) / n);
  }
  return out;
}

std::vector<Index> conditional_bernoulli_sample(std::span<const double> probs,
                                                Index m, Rng& rng) {
  const Index total = static_cast<Index>(probs.size());
  check_subset_size(total, m);

  std::vector<Index> forced;
  std::vector<Index> open;
  std::vector<Index> zero;
  for (Index i = 0; i < total; ++i) {
    const double p = probs[i];
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw DegenerateWeights("conditional_bernoulli_sample: invalid probability");
    }
    if (p >= 1.0) {
      forced.push_back(i);
    } else if (p > 0.0) {
      open.push_back(i);
    } else {
      zero.push_back(i);
    }
  }
  if (forced.empty() && open.empty()) {
    throw DegenerateWeights("conditional_bernoulli_sample: every probability is zero");
  }
  if (static_cast<Index>(forced.size()) >= m) {
    return draw_without_replacement(std::move(forced), m, rng);
  }
  if (static_cast<Index>(forced.size() + open.size()) <= m) {
    // Too few candidates: keep all of them and fill up uniformly from the
    // zero-probability entries (the limit of vanishing probabilities).
    std::vector<Index> chosen = forced;
    chosen.insert(chosen.end(), open.begin(), open.end());
    const Index fill = m - static_cast<Index>(chosen.size());
    const std::vector<Index> extra = draw_without_replacement(std::move(zero), fill, rng);
    chosen.insert(chosen.end(), extra.begin(), extra.end());
    std::sort(chosen.begin(), chosen.end());
    return chosen;
  }
  const Index need = m - static_cast<Index>(forced.size());
  const Index n = static_cast<Index>(open.size());

  // log_esp(i, k): log of the k-th elementary symmetric polynomial of the
  // odds p/(1-p) over open[i..n).
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  std::vector<double> log_odds(n);
  for (Index i = 0; i < n; ++i) {
    const double p = probs[open[i]];
    log_odds[i] = std::log(p) - std::log1p(-p);
  }
  const Index width = need + 1;
  std::vector<double> log_esp((n + 1) * width, kNegInf);
  auto at = [&](Index i, Index k) -> double& { return log_esp[i * width + k]; };
  at(n, 0) = 0.0;
  for (Index i = n - 1; i >= 0; --i) {
    at(i, 0) = 0.0;
    for (Index k = 1; k <= need; ++k) {
      at(i, k) = log_add(at(i + 1, k), log_odds[i] + at(i + 1, k - 1));
    }
  }

  std::vector<Index> chosen = forced;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Index k = need;
  for (Index i = 0; i < n && k > 0; ++i) {
    const double take = std::exp(log_odds[i] + at(i + 1, k - 1) - at(i, k));
    if (unit(rng) < take) {
      chosen.push_back(open[i]);
      --k;
    }
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

Selection select_loss_based(std::span<const double> losses, Index m,
                            const StrategyConfig& cfg, LossBuffer& buffer, Rng& rng) {
  const Index batch = static_cast<Index>(losses.size());
  check_subset_size(batch, m);
  for (double l : losses) {
    if (!std::isfinite(l)) throw NonFiniteValue("select_loss_based: non-finite loss");
  }

  const bool rolling = cfg.cdf_source == CdfSource::rolling_buffer;
  std::vector<double> reference;
  if (rolling && !buffer.empty()) {
    reference = buffer.contents();
  } else {
    reference.assign(losses.begin(), losses.end());
  }
  const double beta = static_cast<double>(batch) / static_cast<double>(m);
  std::vector<double> probs = empirical_cdf(losses, reference);
  bool any_positive = false;
  for (double& p : probs) {
    p = std::pow(p, beta);
    any_positive = any_positive || p > 0.0;
  }
  if (!any_positive) throw DegenerateWeights("select_loss_based: all keep probabilities are zero");

  Selection sel = unit_selection(conditional_bernoulli_sample(probs, m, rng));
  if (rolling) buffer.push(losses);
  return sel;
}

bool normalize_weights(Selection& sel, bool clip_negative) {
  DenseVector<double> w = clip_negative ? DenseVector<double>(sel.weights.cwiseMax(0.0)) : sel.weights;
  const double l1 = w.lpNorm<1>();
  if (!(l1 > 0.0) || !std::isfinite(l1)) return false;
  sel.weights = w * (static_cast<double>(sel.size()) / l1);
  return true;
}

Selection select_grad_match(const GramMatrix<double>& k, Index m,
                            const StrategyConfig& cfg, Rng& rng) {
  const Index batch = k.rows();
  check_subset_size(batch, m);

  const DenseVector<double> t = mean_correlations(k);
  OmpConfig omp_cfg;
  omp_cfg.max_atoms = m;
  omp_cfg.abs_correlation = cfg.abs_correlation;

  Selection sel;
  try {
    sel = omp_gram(k, t, omp_cfg);
  } catch (const EmptySelection&) {
    Selection fb = select_random(batch, m, rng);
    fb.fallback = true;
    return fb;
  }
  if (!normalize_weights(sel, cfg.clip_negative)) {
    Selection fb = select_random(batch, m, rng);
    fb.fallback = true;
    return fb;
  }

  if (cfg.pad_to_m && sel.size() < m) {
    std::vector<char> taken(batch, 0);
    for (Index i : sel.indices) taken[i] = 1;
    std::vector<Index> rest;
    for (Index i = 0; i < batch; ++i) {
      if (!taken[i]) rest.push_back(i);
    }
    const Index extra = m - sel.size();
    std::vector<Index> pad = draw_without_replacement(std::move(rest), extra, rng);
    const Index old = sel.size();
    sel.indices.insert(sel.indices.end(), pad.begin(), pad.end());
    sel.weights.conservativeResize(m);
    sel.weights.tail(m - old).setOnes();
  }
  return sel;
}

Selection select_subset(const StrategyConfig& cfg, const BatchTape<double>& tape,
                        Index m, LossBuffer& buffer, Rng& rng) {
  const Index batch = tape.batch_size();
  switch (cfg.kind) {
    case StrategyKind::random:
      return select_random(batch, m, rng);
    case StrategyKind::loss_based: {
      const std::span<const double> losses(tape.losses.data(),
                                           static_cast<std::size_t>(tape.losses.size()));
      return select_loss_based(losses, m, cfg, buffer, rng);
    }
    case StrategyKind::grad_match:
      return select_grad_match(gram_implicit(tape), m, cfg, rng);
    case StrategyKind::full: {
      std::vector<Index> all(batch);
      std::iota(all.begin(), all.end(), Index{0});
      return unit_selection(std::move(all));
    }
  }
  throw Error("select_subset: unknown strategy");
}

}  // namespace sbp
