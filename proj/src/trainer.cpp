#include "sbp/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include "sbp/csv.hpp"

namespace sbp {

std::string_view to_string(BatchMode mode) { return mode == BatchMode::fixed ? "fixed" : "scaled"; }

std::string_view to_string(OptimizerKind kind) {
  return kind == OptimizerKind::sgd_momentum ? "sgd_momentum" : "plain_sgd";
}

std::string_view to_string(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::step: return "step";
    case ScheduleKind::cosine: return "cosine";
    case ScheduleKind::constant: return "constant";
  }
  return "?";
}

std::optional<BatchMode> parse_batch_mode(std::string_view name) {
  if (name == "fixed") return BatchMode::fixed;
  if (name == "scaled") return BatchMode::scaled;
  return std::nullopt;
}

std::optional<OptimizerKind> parse_optimizer(std::string_view name) {
  if (name == "sgd_momentum") return OptimizerKind::sgd_momentum;
  if (name == "plain_sgd") return OptimizerKind::plain_sgd;
  return std::nullopt;
}

std::optional<ScheduleKind> parse_schedule(std::string_view name) {
  if (name == "step") return ScheduleKind::step;
  if (name == "cosine") return ScheduleKind::cosine;
  if (name == "constant") return ScheduleKind::constant;
  return std::nullopt;
}

void TrainConfig::validate() const {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw BadFraction("train fraction must lie in (0, 1], got " + std::to_string(fraction));
  }
  if (base_batch < 1) throw Error("train.base_batch must be at least 1");
  if (epochs < 1) throw Error("train.epochs must be at least 1");
  if (!(lr_factor > 0.0 && lr_factor <= 10.0)) throw Error("train.lr_factor must lie in (0, 10]");
  if (!(base_lr > 0.0)) throw Error("train.lr must be positive");
  if (!(label_noise >= 0.0 && label_noise < 1.0)) throw BadFraction("train.label_noise must lie in [0, 1)");
  if (weight_decay < 0.0 || momentum < 0.0) throw Error("momentum and weight decay must be non-negative");
  for (std::size_t i = 1; i < milestones.size(); ++i) {
    if (!(milestones[i] > milestones[i - 1])) throw Error("train.milestones must be strictly increasing");
  }
}

BatchSizes resolve_batch_sizes(const TrainConfig& cfg) {
  cfg.validate();
  BatchSizes sizes;
  if (cfg.batch_mode == BatchMode::fixed) {
    sizes.forward = cfg.base_batch;
    sizes.backward = std::max<Index>(
        1, static_cast<Index>(std::llround(cfg.fraction * static_cast<double>(cfg.base_batch))));
  } else {
    sizes.forward = static_cast<Index>(std::llround(static_cast<double>(cfg.base_batch) / cfg.fraction));
    sizes.backward = cfg.base_batch;
  }
  if (sizes.backward < 1 || sizes.backward > sizes.forward) {
    throw BadFraction("fraction yields an empty or oversized subset");
  }
  return sizes;
}

Index total_epochs(const TrainConfig& cfg) {
  if (!cfg.stretch_schedule) return cfg.epochs;
  return std::max<Index>(1, static_cast<Index>(std::llround(static_cast<double>(cfg.epochs) / cfg.lr_factor)));
}

std::vector<double> effective_milestones(const TrainConfig& cfg) {
  std::vector<double> out = cfg.milestones;
  if (cfg.stretch_schedule) {
    for (double& m : out) m /= cfg.lr_factor;
  }
  return out;
}

double lr_at(const TrainConfig& cfg, double epoch) {
  const double initial = cfg.lr_factor * cfg.base_lr;
  switch (cfg.schedule) {
    case ScheduleKind::constant:
      return initial;
    case ScheduleKind::step: {
      double lr = initial;
      for (double m : effective_milestones(cfg)) {
        if (epoch >= m) lr *= cfg.decay_factor;
      }
      return lr;
    }
    case ScheduleKind::cosine: {
      const double horizon = static_cast<double>(total_epochs(cfg));
      return 0.5 * initial * (1.0 + std::cos(std::numbers::pi * epoch / horizon));
    }
  }
  return initial;
}

SgdOptimizer::SgdOptimizer(const TrainConfig& cfg, Index parameter_count)
    : kind_(cfg.optimizer),
      momentum_(cfg.momentum),
      nesterov_(cfg.nesterov),
      weight_decay_(cfg.weight_decay),
      velocity_(DenseVector<double>::Zero(parameter_count)) {}

void SgdOptimizer::step(DenseVector<double>& theta, const DenseVector<double>& grad, double lr) {
  if (grad.size() != theta.size() || theta.size() != velocity_.size()) {
    throw DimensionMismatch("SgdOptimizer::step: size mismatch");
  }
  DenseVector<double> g = grad;
  if (weight_decay_ != 0.0) g += weight_decay_ * theta;
  if (kind_ == OptimizerKind::plain_sgd || momentum_ == 0.0) {
    theta -= lr * g;
    return;
  }
  velocity_ = momentum_ * velocity_ + g;
  if (nesterov_) {
    theta -= lr * (g + momentum_ * velocity_);
  } else {
    theta -= lr * velocity_;
  }
}

LabelNoiseResult apply_label_noise(const std::vector<int>& labels, double fraction,
                                   Index num_classes, Rng& rng) {
  if (!(fraction >= 0.0 && fraction < 1.0)) throw BadFraction("label noise fraction must lie in [0, 1)");
  LabelNoiseResult out;
  out.labels = labels;
  const Index n = static_cast<Index>(labels.size());
  const Index count = static_cast<Index>(std::floor(fraction * static_cast<double>(n)));
  if (count == 0) return out;
  if (num_classes < 1) throw Error("label noise needs at least one class");
  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), Index{0});
  for (Index i = 0; i < count; ++i) {
    std::uniform_int_distribution<Index> pick(i, n - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  order.resize(count);
  std::sort(order.begin(), order.end());
  std::uniform_int_distribution<int> cls(0, static_cast<int>(num_classes) - 1);
  for (Index i : order) out.labels[i] = cls(rng);
  out.redrawn = std::move(order);
  return out;
}

double TrainRun::max_test_accuracy() const {
  double best = 0.0;
  for (const auto& r : records) {
    if (std::isfinite(r.test_accuracy)) best = std::max(best, r.test_accuracy);
  }
  return best;
}

Mlp init_model(const TrainConfig& cfg, ModelSpec spec, const Dataset& data) {
  spec.input_dim = data.feature_dim();
  spec.num_classes = data.num_classes;
  Rng rng = make_rng(cfg.seed, streams::init + (spec.init_seed << 16));
  return Mlp::initialized(spec, rng);
}

TrainRun run_training(const TrainConfig& cfg, const StrategyConfig& strategy,
                      const ModelSpec& spec, const Dataset& data) {
  cfg.validate();
  strategy.validate();
  const Index n = data.train_size();
  if (n == 0) throw Error("run_training: empty training set");

  Mlp net = init_model(cfg, spec, data);
  Rng shuffle_rng = make_rng(cfg.seed, streams::shuffle);
  Rng select_rng = make_rng(cfg.seed, streams::selection);

  std::vector<int> train_y = data.train_y;
  if (cfg.label_noise > 0.0) {
    Rng noise_rng = make_rng(cfg.seed, streams::label_noise);
    train_y = apply_label_noise(train_y, cfg.label_noise, data.num_classes, noise_rng).labels;
  }

  const BatchSizes sizes = resolve_batch_sizes(cfg);
  const Index epochs = total_epochs(cfg);
  LossBuffer buffer(strategy.buffer_capacity > 0
                        ? strategy.buffer_capacity
                        : static_cast<std::size_t>(8 * cfg.base_batch));
  SgdOptimizer opt(cfg, net.parameter_count());

  TrainRun run;
  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), Index{0});
  Index steps = 0;
  Index backprop_cum = 0;
  double cost_cum = 0.0;

  DenseMatrix<double> xb;
  std::vector<int> yb;
  for (Index epoch = 0; epoch < epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    const double lr = lr_at(cfg, static_cast<double>(epoch));
    double loss_sum = 0.0;
    double selected_sum = 0.0;
    double weight_max = 0.0;
    Index epoch_steps = 0;

    for (Index start = 0; start < n; start += sizes.forward) {
      const Index size = std::min(sizes.forward, n - start);
      xb.resize(size, data.feature_dim());
      yb.resize(size);
      for (Index a = 0; a < size; ++a) {
        xb.row(a) = data.train_x.row(order[start + a]);
        yb[a] = train_y[order[start + a]];
      }
      const BatchTape<double> tape = forward_tape(net, xb, yb);
      const double batch_loss = tape.losses.sum();
      if (!std::isfinite(batch_loss)) {
        MetricsRecord diag;
        diag.epoch = epoch + 1;
        diag.step = steps;
        diag.train_loss = batch_loss;
        diag.test_accuracy = std::numeric_limits<double>::quiet_NaN();
        diag.backprop_points_cum = backprop_cum;
        diag.cost_units_cum = cost_cum;
        run.records.push_back(diag);
        run.final_parameters = net.parameters();
        run.abort_reason = "non-finite training loss at epoch " + std::to_string(epoch + 1) +
                           ", step " + std::to_string(steps);
        return run;
      }
      loss_sum += batch_loss;

      const Index m = size == sizes.forward
                          ? sizes.backward
                          : std::clamp<Index>(static_cast<Index>(std::floor(cfg.fraction * static_cast<double>(size))),
                                              1, size);
      const Selection sel = select_subset(strategy, tape, m, buffer, select_rng);
      if (sel.fallback) ++run.fallback_selections;

      const GradientVector grad = weighted_backward(net, xb, yb, sel);
      opt.step(net.parameters(), grad.values, lr);

      ++steps;
      ++epoch_steps;
      backprop_cum += sel.size();
      cost_cum += cost_units(size, sel.size());
      run.forward_points_cum += size;
      run.full_batch_cost_cum += static_cast<double>(size);
      selected_sum += static_cast<double>(sel.size());
      weight_max = std::max(weight_max, sel.weights.maxCoeff());
    }

    MetricsRecord rec;
    rec.epoch = epoch + 1;
    rec.step = steps;
    rec.train_loss = loss_sum / static_cast<double>(n);
    rec.test_accuracy = data.test_size() > 0 ? accuracy(net, data.test_x, data.test_y) : 0.0;
    rec.backprop_points_cum = backprop_cum;
    rec.cost_units_cum = cost_cum;
    rec.selection_size_mean = selected_sum / static_cast<double>(epoch_steps);
    rec.weight_max = weight_max;
    run.records.push_back(rec);
  }
  run.final_parameters = net.parameters();
  return run;
}

void write_metrics_csv(const std::vector<MetricsRecord>& records, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << kMetricsHeader << '\n';
  for (const auto& r : records) {
    out << r.epoch << ',' << r.step << ',' << csv::format(r.train_loss) << ','
        << csv::format(r.test_accuracy) << ',' << r.backprop_points_cum << ','
        << csv::format(r.cost_units_cum) << ',' << csv::format(r.selection_size_mean) << ','
        << csv::format(r.weight_max) << '\n';
  }
}

std::vector<MetricsRecord> read_metrics_csv(const std::string& path) {
  const csv::Table table = csv::read_file(path);
  if (csv::split_line(kMetricsHeader) != table.header) throw ParseError(path + ": unexpected metrics header");
  std::vector<MetricsRecord> out;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& f = table.rows[r];
    if (f.size() != 8) throw MalformedRow(path + ":" + std::to_string(table.line_numbers[r]));
    MetricsRecord rec;
    long long epoch = 0, step = 0, bp = 0;
    const bool ok = csv::parse_int(f[0], epoch) && csv::parse_int(f[1], step) &&
                    csv::parse_double(f[2], rec.train_loss) &&
                    csv::parse_double(f[3], rec.test_accuracy) && csv::parse_int(f[4], bp) &&
                    csv::parse_double(f[5], rec.cost_units_cum) &&
                    csv::parse_double(f[6], rec.selection_size_mean) &&
                    csv::parse_double(f[7], rec.weight_max);
    if (!ok) throw MalformedRow(path + ":" + std::to_string(table.line_numbers[r]));
    rec.epoch = epoch;
    rec.step = step;
    rec.backprop_points_cum = bp;
    out.push_back(rec);
  }
  return out;
}

}  // namespace sbp
