#pragma once

// Experiment drivers behind the command-line tool.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sbp/config.hpp"

namespace sbp {

struct SummaryRow {
  std::string strategy;
  double fraction = 0.0;
  std::uint64_t seed = 0;
  double max_test_accuracy = 0.0;
  double cost_units_total = 0.0;

  bool operator==(const SummaryRow&) const = default;
};

inline constexpr std::string_view kSummaryHeader =
    "strategy,fraction,seed,max_test_accuracy,cost_units_total";

void write_summary_csv(const std::vector<SummaryRow>& rows, const std::string& path);
std::vector<SummaryRow> read_summary_csv(const std::string& path);

/// Mean/min/max of max_test_accuracy over seeds for one (strategy, ρ) cell.
struct CellAggregate {
  std::string strategy;
  double fraction = 0.0;
  double mean_accuracy = 0.0;
  double min_accuracy = 0.0;
  double max_accuracy = 0.0;
  Index runs = 0;
};

/// Groups rows by (strategy, fraction) in first-appearance order.
std::vector<CellAggregate> aggregate_summary(const std::vector<SummaryRow>& rows);
void write_aggregate_csv(const std::vector<CellAggregate>& cells, const std::string& path);

struct GridCell {
  StrategyConfig strategy;
  TrainConfig train;
  std::string metrics_path;
};

struct GridOutcome {
  std::vector<SummaryRow> summary;  // one per cell, in grid order
  std::vector<std::string> errors;  // "<cell>: <message>" for failed cells
  bool ok() const { return errors.empty(); }
};

/// Expands strategies × fractions × seeds in that nesting order.
std::vector<GridCell> expand_grid(const ExperimentSpec& spec, const std::string& out_dir);

/// Runs every cell on a pool of `jobs` threads and writes one metrics CSV
/// per cell plus summary.csv and summary_by_cell.csv once all cells finish.
GridOutcome run_grid(const ExperimentSpec& spec, const Dataset& data, const std::string& out_dir,
                     int jobs);

struct CommandOptions {
  std::string out_dir;  // empty: spec.output_dir
  int jobs = 1;
  std::optional<std::uint64_t> seed;
};

int cmd_train(const ExperimentSpec& spec, const CommandOptions& opts, std::ostream& log);
int cmd_grad_error(const ExperimentSpec& spec, const CommandOptions& opts, std::ostream& log);
int cmd_synth_data(const ExperimentSpec& spec, const CommandOptions& opts, std::ostream& log);
int cmd_selftest(std::ostream& log, std::uint64_t seed = 0);

}  // namespace sbp
