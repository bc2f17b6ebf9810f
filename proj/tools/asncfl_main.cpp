// asncfl: pretrain the autoencoder, generate scenarios, run unsupervised
// clustered federated learning over them and summarize the results.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "asncfl/commands.hpp"
#include "asncfl/config.hpp"
#include "asncfl/errors.hpp"

namespace {

constexpr const char* kOutEnv = "ASNCFL_OUT";

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "key = value config file");
  cmd->add_option("--seed", c.seed, "base seed (overrides the config)");
  cmd->add_option("--out", c.out, "output directory (overrides $ASNCFL_OUT and the config)");
  cmd->add_option("--workers", c.workers, "parallel scenarios (results do not depend on it)")
      ->check(CLI::PositiveNumber);
}

asncfl::RunConfig resolve(const Common& c) {
  asncfl::RunConfig config =
      c.config_path.empty() ? asncfl::RunConfig{} : asncfl::load_config(c.config_path);
  if (c.seed) config.seed = *c.seed;
  if (c.workers) config.workers = *c.workers;
  if (!c.out.empty()) {
    config.out = c.out;
  } else if (const char* env = std::getenv(kOutEnv); env != nullptr && *env != '\0') {
    config.out = env;
  }
  config.validate();
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unsupervised clustered federated learning for acoustic sensor networks"};
  app.require_subcommand(1);

  Common common;
  auto* pretrain = app.add_subcommand("pretrain", "train the autoencoder on a synthetic corpus");
  add_common(pretrain, common);

  auto* simulate = app.add_subcommand("simulate", "write seeded scenario files");
  add_common(simulate, common);
  std::optional<int> n_scenarios;
  simulate->add_option("-n,--scenarios", n_scenarios, "number of scenarios")
      ->check(CLI::PositiveNumber);

  auto* run = app.add_subcommand("run", "cluster every scenario and evaluate");
  add_common(run, common);
  asncfl::commands::RunOptions run_opts;
  run->add_option("--checkpoint", run_opts.checkpoint, "model checkpoint (default <out>/model.ckpt)");
  run->add_option("--scenario-dir", run_opts.scenarios, "scenario files (default <out>/scenarios)");
  run->add_flag("--dry-run", run_opts.dry_run, "validate inputs, write nothing");

  auto* report = app.add_subcommand("report", "print the summary tables and write mu.csv");
  add_common(report, common);
  std::string results;
  report->add_option("results", results, "results directory (default <out>/results)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : asncfl::commands::kExitInvalidInput;
  }

  namespace cmd = asncfl::commands;
  try {
    asncfl::RunConfig config = resolve(common);
    if (*pretrain) return cmd::cmd_pretrain(config, config.out, std::cerr);
    if (*simulate) {
      if (n_scenarios) config.n_scenarios = *n_scenarios;
      return cmd::cmd_simulate(config, config.out, std::cerr);
    }
    if (*run) {
      run_opts.out_dir = config.out;
      return cmd::cmd_run(config, run_opts, std::cerr);
    }
    if (*report) {
      return cmd::cmd_report(results.empty() ? cmd::results_dir(config.out) : results,
                             std::cout, std::cerr);
    }
  } catch (const asncfl::InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cmd::kExitInvalidInput;
  } catch (const asncfl::FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cmd::kExitInvalidInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cmd::kExitFailure;
  }
  return cmd::kExitInvalidInput;
}
