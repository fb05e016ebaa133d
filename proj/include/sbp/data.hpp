#pragma once

// Datasets: CSV ingestion and seeded synthetic generators.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sbp/linalg.hpp"

namespace sbp {

struct Dataset {
  DenseMatrix<double> train_x;
  std::vector<int> train_y;
  DenseMatrix<double> test_x;
  std::vector<int> test_y;
  Index num_classes = 0;

  Index train_size() const { return train_x.rows(); }
  Index test_size() const { return test_x.rows(); }
  Index feature_dim() const { return train_x.cols(); }
};

enum class DatasetKind { csv, blobs, two_moons };

std::string_view to_string(DatasetKind kind);
std::optional<DatasetKind> parse_dataset_kind(std::string_view name);

struct DatasetDescriptor {
  DatasetKind kind = DatasetKind::blobs;
  // csv
  std::string path;
  std::string label_column = "label";  // header name, or 0-based index without header
  std::vector<std::string> feature_columns;  // empty: every other column
  bool header = true;
  // split (all kinds)
  double split = 0.8;  // fraction of rows used for training
  std::uint64_t split_seed = 0;
  // synthetic
  Index n = 3000;
  Index classes = 3;  // csv: 0 infers max label + 1
  Index dim = 2;
  double separation = 4.0;  // class-mean radius in units of within-class σ
  double noise = 0.1;       // two_moons jitter
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const DatasetDescriptor&) const = default;
};

/// Raw rows before the train/test split.
struct LabeledRows {
  DenseMatrix<double> x;
  std::vector<int> y;
  Index num_classes = 0;
};

/// Gaussian clusters with unit within-class σ. Class c has ⌊n/C⌋ or ⌈n/C⌉
/// points around a mean at distance `separation` from the origin (evenly
/// spaced on a circle in the first two coordinates; along the axis when
/// dim = 1).
LabeledRows synth_blobs_rows(const DatasetDescriptor& desc);
LabeledRows synth_two_moons_rows(const DatasetDescriptor& desc);

/// Seeded shuffle, then the first round(split·N) rows train.
Dataset split_rows(const LabeledRows& rows, double split, std::uint64_t split_seed);

Dataset synth_blobs(const DatasetDescriptor& desc);
Dataset synth_two_moons(const DatasetDescriptor& desc);

/// Loads a CSV, splits it and standardizes every feature column with the
/// train-split mean and standard deviation. Columns whose train variance is
/// below 1e-12 are only centered.
Dataset ingest_csv(const DatasetDescriptor& desc);

Dataset make_dataset(const DatasetDescriptor& desc);

/// Writes feature columns x0..x{d-1} and a `label` column, train rows first.
void write_dataset_csv(const Dataset& data, const std::string& path);

}  // namespace sbp
