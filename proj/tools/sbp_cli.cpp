#include <cstdint>
#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "sbp/config.hpp"
#include "sbp/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Selective-backprop subset selection experiments"};
  app.require_subcommand(1);

  std::string config_path;
  sbp::CommandOptions opts;
  std::uint64_t seed = 0;

  auto add_common = [&](CLI::App* cmd, bool needs_config) {
    auto* cfg = cmd->add_option("--config", config_path, "Experiment config file (key = value)");
    if (needs_config) cfg->required()->check(CLI::ExistingFile);
    cmd->add_option("--out", opts.out_dir, "Output directory (overrides output.dir)");
    cmd->add_option("--jobs", opts.jobs, "Worker threads for the run grid")->check(CLI::PositiveNumber);
    cmd->add_option("--seed", seed, "Override the seed list with a single seed");
  };

  auto* train = app.add_subcommand("train", "Run the strategy x fraction x seed training grid");
  auto* grad = app.add_subcommand("grad-error", "Gradient-estimate error of each strategy");
  auto* synth = app.add_subcommand("synth-data", "Write the configured synthetic dataset as CSV");
  auto* selftest = app.add_subcommand("selftest", "Run the built-in oracle checks");
  add_common(train, true);
  add_common(grad, true);
  add_common(synth, true);
  selftest->add_option("--seed", seed, "Seed for the random check instances");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*selftest) return sbp::cmd_selftest(std::cout, seed);
    for (auto* cmd : {train, grad, synth}) {
      if (*cmd && cmd->count("--seed") > 0) opts.seed = seed;
    }
    const sbp::ExperimentSpec spec = sbp::load_config(config_path);
    if (*train) return sbp::cmd_train(spec, opts, std::cout);
    if (*grad) return sbp::cmd_grad_error(spec, opts, std::cout);
    if (*synth) return sbp::cmd_synth_data(spec, opts, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
