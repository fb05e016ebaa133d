#pragma once

// Selective-backprop training loop: forward M points, select m, update on
// the weighted subset.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sbp/data.hpp"
#include "sbp/model.hpp"
#include "sbp/selection.hpp"

namespace sbp {

enum class BatchMode { fixed, scaled };
enum class OptimizerKind { sgd_momentum, plain_sgd };
enum class ScheduleKind { step, cosine, constant };

std::string_view to_string(BatchMode mode);
std::string_view to_string(OptimizerKind kind);
std::string_view to_string(ScheduleKind kind);
std::optional<BatchMode> parse_batch_mode(std::string_view name);
std::optional<OptimizerKind> parse_optimizer(std::string_view name);
std::optional<ScheduleKind> parse_schedule(std::string_view name);

struct TrainConfig {
  Index base_batch = 128;  // M_base
  double fraction = 1.0;   // ρ
  BatchMode batch_mode = BatchMode::fixed;
  Index epochs = 20;  // T_base
  OptimizerKind optimizer = OptimizerKind::sgd_momentum;
  double momentum = 0.9;
  bool nesterov = true;
  double weight_decay = 5e-4;
  ScheduleKind schedule = ScheduleKind::constant;
  std::vector<double> milestones;
  double decay_factor = 0.2;
  double base_lr = 0.1;
  double lr_factor = 1.0;  // β_lr
  bool stretch_schedule = false;
  double label_noise = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct BatchSizes {
  Index forward = 0;   // M
  Index backward = 0;  // m
  bool operator==(const BatchSizes&) const = default;
};

/// fixed: (M_base, round(ρ·M_base)); scaled: (round(M_base/ρ), M_base).
BatchSizes resolve_batch_sizes(const TrainConfig& cfg);

/// Forward pass at 1/3 unit per point plus a full forward+backward per
/// selected point. Backpropagating the whole batch costs M.
inline double cost_units(Index forward, Index backward) {
  return static_cast<double>(forward) / 3.0 + static_cast<double>(backward);
}

/// T_base, or round(T_base/β_lr) when the schedule is stretched.
Index total_epochs(const TrainConfig& cfg);

/// Step-decay milestones after optional stretching by 1/β_lr.
std::vector<double> effective_milestones(const TrainConfig& cfg);

/// Learning rate in effect during `epoch` (0-based).
double lr_at(const TrainConfig& cfg, double epoch);

/// SGD with optional heavy-ball or Nesterov momentum and weight decay added
/// to the gradient:  g += λθ;  v = μv + g;  θ -= lr·(nesterov ? g + μv : v).
class SgdOptimizer {
 public:
  SgdOptimizer(const TrainConfig& cfg, Index parameter_count);

  void step(DenseVector<double>& theta, const DenseVector<double>& grad, double lr);

 private:
  OptimizerKind kind_;
  double momentum_;
  bool nesterov_;
  double weight_decay_;
  DenseVector<double> velocity_;
};

struct LabelNoiseResult {
  std::vector<int> labels;
  std::vector<Index> redrawn;  // ascending
};

/// Redraws the labels of ⌊fraction·N⌋ distinct, uniformly chosen positions
/// uniformly over all classes (a redrawn label may equal the original).
LabelNoiseResult apply_label_noise(const std::vector<int>& labels, double fraction,
                                   Index num_classes, Rng& rng);

struct MetricsRecord {
  Index epoch = 0;  // 1-based
  Index step = 0;   // optimizer steps so far
  double train_loss = 0.0;
  double test_accuracy = 0.0;
  Index backprop_points_cum = 0;
  double cost_units_cum = 0.0;
  double selection_size_mean = 0.0;
  double weight_max = 0.0;

  bool operator==(const MetricsRecord&) const = default;
};

struct TrainRun {
  std::vector<MetricsRecord> records;
  std::optional<std::string> abort_reason;
  Index fallback_selections = 0;
  Index forward_points_cum = 0;
  double full_batch_cost_cum = 0.0;  // Σ M over steps
  DenseVector<double> final_parameters;

  double max_test_accuracy() const;
};

/// Seed streams drawn from TrainConfig::seed.
namespace streams {
inline constexpr std::uint64_t init = 0x100;
inline constexpr std::uint64_t shuffle = 0x200;
inline constexpr std::uint64_t selection = 0x300;
inline constexpr std::uint64_t label_noise = 0x400;
}  // namespace streams

/// Model of `spec` with input width and class count taken from `data`,
/// initialized from the (cfg.seed, spec.init_seed) stream.
Mlp init_model(const TrainConfig& cfg, ModelSpec spec, const Dataset& data);

/// Trains on data.train_* and evaluates on data.test_* once per epoch.
/// Epochs count forward-propagated points. The last short batch of an epoch
/// backpropagates max(1, ⌊ρ·size⌋) points. A non-finite forward loss stops
/// the run with a diagnostic record.
TrainRun run_training(const TrainConfig& cfg, const StrategyConfig& strategy,
                      const ModelSpec& spec, const Dataset& data);

void write_metrics_csv(const std::vector<MetricsRecord>& records, const std::string& path);
std::vector<MetricsRecord> read_metrics_csv(const std::string& path);

inline constexpr std::string_view kMetricsHeader =
    "epoch,step,train_loss,test_accuracy,backprop_points_cum,cost_units_cum,"
    "selection_size_mean,weight_max";

}  // namespace sbp
