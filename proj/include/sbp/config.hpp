#pragma once

// Flat key = value experiment configuration.
//
//   # comment
//   preset = cifar_style
//   dataset.kind = blobs
//   strategy.kinds = random, loss_based, grad_match
//   grid.fractions = 0.1, 0.3, 0.5
//   grid.seeds = 0, 1, 2
//
// Keys are grouped as dataset.*, model.*, train.*, strategy.*, grid.*,
// grad_error.* and output.dir; see config_keys() for the full list. A preset
// is applied before every other key regardless of where it appears.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sbp/data.hpp"
#include "sbp/model.hpp"
#include "sbp/selection.hpp"
#include "sbp/trainer.hpp"

namespace sbp {

struct GradErrorSettings {
  Index num_batches = 200;
  Index batch_size = 0;         // 0: train.base_batch
  Index subset_size = 0;        // 0: round(first grid fraction · batch size)
  Index checkpoint_epochs = 0;  // 0: evaluate at the random initialization

  bool operator==(const GradErrorSettings&) const = default;
};

struct ExperimentSpec {
  DatasetDescriptor dataset;
  ModelSpec model;
  TrainConfig train;
  StrategyConfig strategy;  // shared settings; kind and fraction come from the grid
  std::vector<StrategyKind> strategies;
  std::vector<double> fractions;
  std::vector<std::uint64_t> seeds;
  std::string output_dir = "out";
  GradErrorSettings grad_error;

  /// One StrategyConfig per listed kind, at fraction ρ.
  std::vector<StrategyConfig> strategy_configs(double fraction) const;

  bool operator==(const ExperimentSpec&) const = default;
};

/// Training hyperparameters of a named preset: cifar_style, svhn_style,
/// imagenet32_style.
std::optional<TrainConfig> preset_train_config(std::string_view name);
std::vector<std::string> preset_names();

/// Every accepted key, in dump order (plus `preset`).
const std::vector<std::string>& config_keys();
const std::vector<std::string>& required_config_keys();

ExperimentSpec parse_config(std::string_view text, const std::string& source = "<config>");
ExperimentSpec load_config(const std::string& path);

/// Text that parse_config maps back to an equal spec.
std::string dump_config(const ExperimentSpec& spec);

}  // namespace sbp
