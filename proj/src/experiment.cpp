#include "sbp/experiment.hpp"

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <ostream>
#include <thread>

#include "sbp/csv.hpp"
#include "sbp/evalgrad.hpp"
#include "sbp/selftest.hpp"

namespace sbp {

void write_summary_csv(const std::vector<SummaryRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << kSummaryHeader << '\n';
  for (const auto& r : rows) {
    out << r.strategy << ',' << csv::format(r.fraction) << ',' << r.seed << ','
        << csv::format(r.max_test_accuracy) << ',' << csv::format(r.cost_units_total) << '\n';
  }
}

std::vector<SummaryRow> read_summary_csv(const std::string& path) {
  const csv::Table table = csv::read_file(path);
  if (csv::split_line(kSummaryHeader) != table.header) throw ParseError(path + ": unexpected summary header");
  std::vector<SummaryRow> out;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& f = table.rows[r];
    SummaryRow row;
    long long seed = 0;
    if (f.size() != 5 || !csv::parse_double(f[1], row.fraction) || !csv::parse_int(f[2], seed) ||
        !csv::parse_double(f[3], row.max_test_accuracy) || !csv::parse_double(f[4], row.cost_units_total)) {
      throw MalformedRow(path + ":" + std::to_string(table.line_numbers[r]));
    }
    row.strategy = f[0];
    row.seed = static_cast<std::uint64_t>(seed);
    out.push_back(std::move(row));
  }
  return out;
}

std::vector<CellAggregate> aggregate_summary(const std::vector<SummaryRow>& rows) {
  std::vector<CellAggregate> cells;
  for (const auto& r : rows) {
    auto it = std::find_if(cells.begin(), cells.end(), [&](const CellAggregate& c) {
      return c.strategy == r.strategy && c.fraction == r.fraction;
    });
    if (it == cells.end()) {
      cells.push_back({r.strategy, r.fraction, 0.0, r.max_test_accuracy, r.max_test_accuracy, 0});
      it = cells.end() - 1;
    }
    it->mean_accuracy += r.max_test_accuracy;
    it->min_accuracy = std::min(it->min_accuracy, r.max_test_accuracy);
    it->max_accuracy = std::max(it->max_accuracy, r.max_test_accuracy);
    ++it->runs;
  }
  for (auto& c : cells) c.mean_accuracy /= static_cast<double>(c.runs);
  return cells;
}

void write_aggregate_csv(const std::vector<CellAggregate>& cells, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << "strategy,fraction,runs,mean_accuracy,min_accuracy,max_accuracy\n";
  for (const auto& c : cells) {
    out << c.strategy << ',' << csv::format(c.fraction) << ',' << c.runs << ','
        << csv::format(c.mean_accuracy) << ',' << csv::format(c.min_accuracy) << ','
        << csv::format(c.max_accuracy) << '\n';
  }
}

std::vector<GridCell> expand_grid(const ExperimentSpec& spec, const std::string& out_dir) {
  std::vector<GridCell> cells;
  for (StrategyKind kind : spec.strategies) {
    for (double fraction : spec.fractions) {
      for (std::uint64_t seed : spec.seeds) {
        GridCell cell;
        cell.strategy = spec.strategy;
        cell.strategy.kind = kind;
        cell.strategy.fraction = fraction;
        cell.train = spec.train;
        cell.train.fraction = fraction;
        cell.train.seed = seed;
        cell.metrics_path = (std::filesystem::path(out_dir) /
                             ("metrics_" + std::string(to_string(kind)) + "_rho" + csv::format(fraction) +
                              "_seed" + std::to_string(seed) + ".csv"))
                                .string();
        cells.push_back(std::move(cell));
      }
    }
  }
  return cells;
}

GridOutcome run_grid(const ExperimentSpec& spec, const Dataset& data, const std::string& out_dir,
                     int jobs) {
  std::filesystem::create_directories(out_dir);
  const std::vector<GridCell> cells = expand_grid(spec, out_dir);
  std::vector<SummaryRow> rows(cells.size());
  std::vector<std::string> failures(cells.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      const GridCell& cell = cells[i];
      SummaryRow& row = rows[i];
      row.strategy = std::string(to_string(cell.strategy.kind));
      row.fraction = cell.train.fraction;
      row.seed = cell.train.seed;
      try {
        const TrainRun run = run_training(cell.train, cell.strategy, spec.model, data);
        write_metrics_csv(run.records, cell.metrics_path);
        row.max_test_accuracy = run.max_test_accuracy();
        row.cost_units_total = run.records.empty() ? 0.0 : run.records.back().cost_units_cum;
        if (run.abort_reason) {
          failures[i] = *run.abort_reason;
        } else if (run.records.empty() || !std::isfinite(run.records.back().train_loss)) {
          failures[i] = "non-finite final loss";
        }
      } catch (const std::exception& e) {
        failures[i] = e.what();
      }
    }
  };
  const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(cells.size())));
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  GridOutcome outcome;
  outcome.summary = rows;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (!failures[i].empty()) {
      outcome.errors.push_back(rows[i].strategy + " rho=" + csv::format(rows[i].fraction) +
                               " seed=" + std::to_string(rows[i].seed) + ": " + failures[i]);
    }
  }
  const std::filesystem::path dir(out_dir);
  write_summary_csv(rows, (dir / "summary.csv").string());
  write_aggregate_csv(aggregate_summary(rows), (dir / "summary_by_cell.csv").string());
  if (!outcome.errors.empty()) {
    std::ofstream err((dir / "errors.log").string());
    for (const auto& e : outcome.errors) err << e << '\n';
  }
  return outcome;
}

namespace {

std::string resolve_out(const ExperimentSpec& spec, const CommandOptions& opts) {
  return opts.out_dir.empty() ? spec.output_dir : opts.out_dir;
}

}  // namespace

int cmd_train(const ExperimentSpec& spec, const CommandOptions& opts, std::ostream& log) {
  ExperimentSpec s = spec;
  if (opts.seed) s.seeds = {*opts.seed};
  const std::string out = resolve_out(s, opts);
  const Dataset data = make_dataset(s.dataset);
  log << "train: " << s.strategies.size() * s.fractions.size() * s.seeds.size() << " runs, "
      << data.train_size() << " train / " << data.test_size() << " test points -> " << out << '\n';
  const GridOutcome outcome = run_grid(s, data, out, opts.jobs);
  for (const auto& c : aggregate_summary(outcome.summary)) {
    log << "  " << c.strategy << " rho=" << csv::format(c.fraction) << "  max test acc mean "
        << csv::format(c.mean_accuracy) << " [" << csv::format(c.min_accuracy) << ", "
        << csv::format(c.max_accuracy) << "]\n";
  }
  for (const auto& e : outcome.errors) log << "  FAILED " << e << '\n';
  return outcome.ok() ? 0 : 1;
}

int cmd_grad_error(const ExperimentSpec& spec, const CommandOptions& opts, std::ostream& log) {
  const std::string out = resolve_out(spec, opts);
  std::filesystem::create_directories(out);
  const Dataset data = make_dataset(spec.dataset);
  const std::uint64_t seed = opts.seed.value_or(spec.seeds.front());

  TrainConfig train = spec.train;
  train.seed = seed;
  train.fraction = 1.0;
  Mlp net = init_model(train, spec.model, data);
  if (spec.grad_error.checkpoint_epochs > 0) {
    train.epochs = spec.grad_error.checkpoint_epochs;
    train.stretch_schedule = false;
    StrategyConfig full;
    full.kind = StrategyKind::random;
    const TrainRun run = run_training(train, full, spec.model, data);
    if (run.abort_reason) {
      log << "grad-error: checkpoint training failed: " << *run.abort_reason << '\n';
      return 1;
    }
    net.parameters() = run.final_parameters;
  }

  const Index forward = spec.grad_error.batch_size > 0 ? spec.grad_error.batch_size : spec.train.base_batch;
  const Index subset = spec.grad_error.subset_size > 0
                           ? spec.grad_error.subset_size
                           : std::max<Index>(1, static_cast<Index>(std::llround(spec.fractions.front() *
                                                                                 static_cast<double>(forward))));
  const auto strategies = spec.strategy_configs(static_cast<double>(subset) / static_cast<double>(forward));
  const auto samples = gradient_error_experiment(net, data.train_x, data.train_y, strategies,
                                                 spec.grad_error.num_batches, forward, subset, seed);
  const std::string path = (std::filesystem::path(out) / "grad_error.csv").string();
  write_histogram_csv(samples, path);
  log << "grad-error: M=" << forward << " m=" << subset << " batches=" << spec.grad_error.num_batches
      << " -> " << path << '\n';
  for (const auto& s : strategies) {
    const std::string name(to_string(s.kind));
    log << "  " << name << " median squared error " << csv::format(median_error(samples, name)) << '\n';
  }
  return 0;
}

int cmd_synth_data(const ExperimentSpec& spec, const CommandOptions& opts, std::ostream& log) {
  DatasetDescriptor desc = spec.dataset;
  if (desc.kind == DatasetKind::csv) {
    log << "synth-data: dataset.kind must be a synthetic generator\n";
    return 1;
  }
  if (opts.seed) desc.seed = *opts.seed;
  const std::string out = resolve_out(spec, opts);
  std::filesystem::create_directories(out);
  const Dataset data = make_dataset(desc);
  const std::string path = (std::filesystem::path(out) / "data.csv").string();
  write_dataset_csv(data, path);
  log << "synth-data: " << data.train_size() + data.test_size() << " rows -> " << path << '\n';
  return 0;
}

int cmd_selftest(std::ostream& log, std::uint64_t seed) {
  bool ok = true;
  for (const auto& r : run_selftest(seed)) {
    log << (r.passed ? "PASS " : "FAIL ") << r.name << "  " << r.detail << '\n';
    ok = ok && r.passed;
  }
  return ok ? 0 : 1;
}

}  // namespace sbp
