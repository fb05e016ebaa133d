#include "sbp/evalgrad.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include "sbp/csv.hpp"

namespace sbp {

GradientVector full_dataset_gradient(const Mlp& net, const DenseMatrix<double>& x,
                                     std::span<const int> y, Index chunk) {
  const Index n = x.rows();
  if (n == 0) throw DimensionMismatch("full_dataset_gradient: empty dataset");
  chunk = std::max<Index>(chunk, 1);
  GradientVector total;
  total.layout = net.layout();
  total.values = DenseVector<double>::Zero(net.parameter_count());
  for (Index start = 0; start < n; start += chunk) {
    const Index size = std::min(chunk, n - start);
    const DenseMatrix<double> xb = x.middleRows(start, size);
    const GradientVector g = mean_gradient(net, xb, y.subspan(start, size));
    total.values += static_cast<double>(size) * g.values;
  }
  total.values /= static_cast<double>(n);
  return total;
}

std::vector<GradErrorSample> gradient_error_experiment(
    const Mlp& net, const DenseMatrix<double>& x, std::span<const int> y,
    const std::vector<StrategyConfig>& strategies, Index num_batches,
    Index forward_batch, Index subset_size, std::uint64_t seed) {
  const Index n = x.rows();
  if (subset_size < 1 || subset_size > forward_batch || forward_batch > n) {
    throw BadFraction("gradient_error_experiment: need 1 <= m <= M <= N");
  }
  if (strategies.empty()) throw Error("gradient_error_experiment: no strategies");

  const GradientVector reference = full_dataset_gradient(net, x, y);
  Rng batch_rng = make_rng(seed, 0x700);
  std::vector<Rng> select_rngs;
  std::vector<LossBuffer> buffers;
  for (std::size_t s = 0; s < strategies.size(); ++s) {
    strategies[s].validate();
    select_rngs.push_back(make_rng(seed, 0x800 + s));
    const std::size_t cap = strategies[s].buffer_capacity > 0
                                ? strategies[s].buffer_capacity
                                : static_cast<std::size_t>(8 * forward_batch);
    buffers.emplace_back(cap);
  }

  std::vector<Index> pool(n);
  std::vector<GradErrorSample> out;
  out.reserve(static_cast<std::size_t>(num_batches) * strategies.size());
  DenseMatrix<double> xb(forward_batch, x.cols());
  std::vector<int> yb(forward_batch);
  for (Index b = 0; b < num_batches; ++b) {
    std::iota(pool.begin(), pool.end(), Index{0});
    for (Index i = 0; i < forward_batch; ++i) {
      std::uniform_int_distribution<Index> pick(i, n - 1);
      std::swap(pool[i], pool[pick(batch_rng)]);
    }
    for (Index i = 0; i < forward_batch; ++i) {
      xb.row(i) = x.row(pool[i]);
      yb[i] = y[pool[i]];
    }
    const BatchTape<double> tape = forward_tape(net, xb, yb);
    for (std::size_t s = 0; s < strategies.size(); ++s) {
      const Selection sel = select_subset(strategies[s], tape, subset_size, buffers[s], select_rngs[s]);
      const GradientVector g = weighted_backward(net, xb, yb, sel);
      out.push_back({std::string(to_string(strategies[s].kind)), b,
                     (g.values - reference.values).squaredNorm()});
    }
  }
  return out;
}

double median_error(const std::vector<GradErrorSample>& samples, const std::string& strategy) {
  std::vector<double> v;
  for (const auto& s : samples) {
    if (s.strategy == strategy) v.push_back(s.squared_error);
  }
  if (v.empty()) throw Error("median_error: no samples for " + strategy);
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  return v.size() % 2 == 1 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

void write_histogram_csv(const std::vector<GradErrorSample>& samples, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << kHistogramHeader << '\n';
  for (const auto& s : samples) {
    out << s.strategy << ',' << s.batch_index << ',' << csv::format(s.squared_error) << '\n';
  }
}

std::vector<GradErrorSample> read_histogram_csv(const std::string& path) {
  const csv::Table table = csv::read_file(path);
  if (csv::split_line(kHistogramHeader) != table.header) throw ParseError(path + ": unexpected histogram header");
  std::vector<GradErrorSample> out;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& f = table.rows[r];
    GradErrorSample s;
    long long b = 0;
    if (f.size() != 3 || !csv::parse_int(f[1], b) || !csv::parse_double(f[2], s.squared_error)) {
      throw MalformedRow(path + ":" + std::to_string(table.line_numbers[r]));
    }
    s.strategy = f[0];
    s.batch_index = b;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace sbp
