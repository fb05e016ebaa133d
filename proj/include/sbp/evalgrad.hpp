#pragma once

// Quality of subset gradient estimates against the exact full-dataset
// gradient at a fixed parameter point.

#include <string>
#include <vector>

#include "sbp/data.hpp"
#include "sbp/model.hpp"
#include "sbp/selection.hpp"

namespace sbp {

struct GradErrorSample {
  std::string strategy;
  Index batch_index = 0;
  double squared_error = 0.0;

  bool operator==(const GradErrorSample&) const = default;
};

/// Exact mean per-example gradient over every row, accumulated in chunks of
/// `chunk` rows.
GradientVector full_dataset_gradient(const Mlp& net, const DenseMatrix<double>& x,
                                     std::span<const int> y, Index chunk = 256);

/// Draws `num_batches` minibatches of M distinct rows; every strategy
/// subsamples the same minibatch (paired design) and the squared distance of
/// its weighted subset gradient to the full gradient is recorded. Each
/// strategy owns its selection RNG stream and loss buffer.
std::vector<GradErrorSample> gradient_error_experiment(
    const Mlp& net, const DenseMatrix<double>& x, std::span<const int> y,
    const std::vector<StrategyConfig>& strategies, Index num_batches,
    Index forward_batch, Index subset_size, std::uint64_t seed);

double median_error(const std::vector<GradErrorSample>& samples, const std::string& strategy);

inline constexpr std::string_view kHistogramHeader = "strategy,batch_index,squared_error";

void write_histogram_csv(const std::vector<GradErrorSample>& samples, const std::string& path);
std::vector<GradErrorSample> read_histogram_csv(const std::string& path);

}  // namespace sbp
