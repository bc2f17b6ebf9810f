#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "asncfl/commands.hpp"
#include "asncfl/errors.hpp"
#include "asncfl/serialize.hpp"

using namespace asncfl;
using namespace asncfl::commands;
namespace fs = std::filesystem;

namespace {

RunConfig tiny_config() {
  RunConfig c;
  c.seed = 4;
  c.nodes = 6;
  c.utterance_seconds = 4.2;
  c.n_scenarios = 2;
  c.pretrain_segments = 4;
  c.pretrain_epochs = 1;
  c.max_rounds = 3;
  c.fusion_trials = 2;
  return c;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("asncfl_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int run_all(const RunConfig& c, const fs::path& dir) {
  std::ostringstream log;
  if (int rc = cmd_pretrain(c, dir.string(), log)) return rc;
  if (int rc = cmd_simulate(c, dir.string(), log)) return rc;
  return cmd_run(c, {dir.string(), "", "", false}, log);
}

}  // namespace

TEST_CASE("end to end on a tiny configuration") {
  const auto dir = fresh_dir("e2e");
  const auto c = tiny_config();
  REQUIRE(run_all(c, dir) == kExitOk);
  CHECK(fs::exists(dir / "model.ckpt"));
  CHECK(fs::exists(dir / "scenarios" / "scenario_0000.json"));
  CHECK(fs::exists(dir / "scenarios" / "scenario_0001.json"));
  const auto summary = io::read_json_file((dir / "results" / "summary.json").string());
  CHECK(summary["n_ok"].get<int>() == 2);
  CHECK(summary["n_failed"].get<int>() == 0);
  CHECK(fs::exists(dir / "results" / "results.csv"));

  std::ostringstream out1, out2, log;
  REQUIRE(cmd_report((dir / "results").string(), out1, log) == kExitOk);
  const std::string report1 = slurp(dir / "results" / "report.txt");
  REQUIRE(cmd_report((dir / "results").string(), out2, log) == kExitOk);
  CHECK(out1.str() == out2.str());
  CHECK(slurp(dir / "results" / "report.txt") == report1);
  CHECK(out1.str().find("label fusion") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("results do not depend on the worker count") {
  const auto a = fresh_dir("w1"), b = fresh_dir("w2");
  auto c = tiny_config();
  REQUIRE(run_all(c, a) == kExitOk);
  c.workers = 2;
  REQUIRE(run_all(c, b) == kExitOk);
  CHECK(slurp(a / "results" / "scenario_0000.json") == slurp(b / "results" / "scenario_0000.json"));
  CHECK(slurp(a / "results" / "results.csv") == slurp(b / "results" / "results.csv"));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("dry run validates without writing results") {
  const auto dir = fresh_dir("dry");
  const auto c = tiny_config();
  std::ostringstream log;
  REQUIRE(cmd_pretrain(c, dir.string(), log) == kExitOk);
  REQUIRE(cmd_simulate(c, dir.string(), log) == kExitOk);
  CHECK(cmd_run(c, {dir.string(), "", "", true}, log) == kExitOk);
  CHECK(!fs::exists(dir / "results" / "summary.json"));
  fs::remove_all(dir);
}

TEST_CASE("invalid inputs") {
  const auto dir = fresh_dir("bad");
  const auto c = tiny_config();
  std::ostringstream out, log;
  CHECK(cmd_report((dir / "results").string(), out, log) == kExitInvalidInput);
  CHECK_THROWS_AS(cmd_run(c, {dir.string(), "", "", false}, log), Error);

  REQUIRE(cmd_pretrain(c, dir.string(), log) == kExitOk);
  REQUIRE(cmd_simulate(c, dir.string(), log) == kExitOk);
  std::ofstream(dir / "model.ckpt", std::ios::binary) << "garbage";
  CHECK_THROWS_AS(cmd_run(c, {dir.string(), "", "", false}, log), FormatError);
  fs::remove_all(dir);
}
