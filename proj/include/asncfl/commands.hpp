#pragma once

#include <ostream>
#include <string>

#include "asncfl/config.hpp"

namespace asncfl::commands {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitInvalidInput = 2;

// Output layout under the output directory:
//   model.ckpt, pretrain_loss.csv          (pretrain)
//   scenarios/scenario_NNNN.json           (simulate)
//   results/<scenario>.json, results.csv,
//   summary.json                           (run)
//   results/report.txt, results/mu.csv     (report)
std::string checkpoint_path(const std::string& out_dir);
std::string scenarios_dir(const std::string& out_dir);
std::string results_dir(const std::string& out_dir);

int cmd_pretrain(const RunConfig& config, const std::string& out_dir, std::ostream& log);

int cmd_simulate(const RunConfig& config, const std::string& out_dir, std::ostream& log);

struct RunOptions {
  std::string out_dir;
  std::string checkpoint;     // empty -> checkpoint_path(out_dir)
  std::string scenarios;      // empty -> scenarios_dir(out_dir)
  bool dry_run = false;
};

int cmd_run(const RunConfig& config, const RunOptions& options, std::ostream& log);

int cmd_report(const std::string& results, std::ostream& out, std::ostream& log);

}  // namespace asncfl::commands
