#include "asncfl/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "asncfl/checkpoint.hpp"
#include "asncfl/errors.hpp"
#include "asncfl/pipeline.hpp"
#include "asncfl/serialize.hpp"

namespace fs = std::filesystem;

namespace asncfl::commands {

namespace {

using io::format_double;
using io::Json;

std::string scenario_file_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "scenario_%04d.json", index);
  return buf;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw InvalidArgument("cannot create directory " + dir);
}

std::vector<fs::path> json_files(const std::string& dir, const std::string& prefix) {
  std::vector<fs::path> files;
  if (!fs::is_directory(dir)) return files;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (e.is_regular_file() && e.path().extension() == ".json" &&
        name.rfind(prefix, 0) == 0) {
      files.push_back(e.path());
    }
  }
  std::sort(files.begin(), files.end());
  return files;
}

struct Slot {
  std::string name;
  acoustics::Scenario scenario;
  std::optional<pipeline::ScenarioOutcome> outcome;
  std::string error;
};

std::string csv_number(double v) { return format_double(v); }

void write_results(const RunConfig& config, const std::string& dir,
                   const std::vector<Slot>& slots) {
  std::vector<const pipeline::ScenarioOutcome*> ok;
  for (const Slot& s : slots) {
    if (s.outcome) ok.push_back(&*s.outcome);
  }

  std::ostringstream csv;
  csv << "index,name,seed,status,clusters,split_round,assignment_accuracy,"
         "d_c1_s1,d_c1_s2,d_c2_s1,d_c2_s2";
  csv << ",acc_plain,f1_plain";
  for (double v : config.v_list) {
    csv << ",acc_mv_v" << format_double(v) << ",f1_mv_v" << format_double(v);
  }
  csv << "\n";
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const Slot& s = slots[i];
    csv << i << "," << s.name << "," << s.scenario.seed << ",";
    if (!s.outcome) {
      csv << "failed" << std::string(7 + 2 * (config.v_list.size() + 1), ',') << "\n";
      continue;
    }
    const auto& o = *s.outcome;
    csv << "ok," << o.clusters.size() << ",";
    if (!o.cfl.log.splits.empty()) csv << o.cfl.log.splits.front().round;
    csv << "," << csv_number(o.eval.assignment_accuracy);
    for (int x = 0; x < 2; ++x) {
      for (int z = 0; z < 2; ++z) {
        csv << ",";
        if (o.eval.has_d_tilde) csv << csv_number(o.eval.d_tilde[x][z]);
      }
    }
    for (const auto& f : o.eval.fusion) {
      csv << "," << csv_number(f.score.accuracy) << "," << csv_number(f.score.f1);
    }
    csv << "\n";
  }
  io::write_text_file(dir + "/results.csv", csv.str());

  Json summary;
  summary["schema_version"] = io::kSchemaVersion;
  summary["kind"] = "summary";
  summary["n_scenarios"] = slots.size();
  summary["n_ok"] = ok.size();
  summary["n_failed"] = slots.size() - ok.size();
  Json failures = Json::array();
  for (const Slot& s : slots) {
    if (!s.outcome) failures.push_back({{"name", s.name}, {"error", s.error}});
  }
  summary["failures"] = std::move(failures);
  std::size_t n_split = 0;
  double acc = 0.0;
  double d[2][2] = {{0, 0}, {0, 0}};
  for (const auto* o : ok) {
    acc += o->eval.assignment_accuracy;
    if (o->eval.has_d_tilde) {
      ++n_split;
      for (int x = 0; x < 2; ++x) {
        for (int z = 0; z < 2; ++z) d[x][z] += o->eval.d_tilde[x][z];
      }
    }
  }
  summary["n_split"] = n_split;
  summary["mean_assignment_accuracy"] =
      ok.empty() ? Json(nullptr) : Json(acc / static_cast<double>(ok.size()));
  if (n_split > 0) {
    const double n = static_cast<double>(n_split);
    summary["d_tilde"] = Json::array({Json::array({d[0][0] / n, d[0][1] / n}),
                                      Json::array({d[1][0] / n, d[1][1] / n})});
  } else {
    summary["d_tilde"] = nullptr;
  }
  Json fusion = Json::array();
  if (!ok.empty()) {
    for (const auto& f : pipeline::aggregate_fusion(ok)) {
      Json fj;
      fj["mode"] = io::fusion_mode_name(f.mode);
      fj["v"] = f.mode == eval::FusionMode::plain_mode ? Json(nullptr) : Json(f.v);
      fj["accuracy"] = f.score.accuracy;
      fj["f1"] = f.score.f1;
      fusion.push_back(std::move(fj));
    }
  }
  summary["fusion"] = std::move(fusion);
  // Worker count and output location do not affect results.
  RunConfig recorded = config;
  recorded.workers = RunConfig{}.workers;
  recorded.out = RunConfig{}.out;
  summary["config"] = serialize_config(recorded);
  io::write_json_file(dir + "/summary.json", summary);
}

}  // namespace

std::string checkpoint_path(const std::string& out_dir) { return out_dir + "/model.ckpt"; }
std::string scenarios_dir(const std::string& out_dir) { return out_dir + "/scenarios"; }
std::string results_dir(const std::string& out_dir) { return out_dir + "/results"; }

int cmd_pretrain(const RunConfig& config, const std::string& out_dir, std::ostream& log) {
  ensure_dir(out_dir);
  pipeline::PretrainResult result{nn::build_autoencoder(0), {}};
  try {
    result = pipeline::pretrain_model(config);
  } catch (const DivergenceError& e) {
    log << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  nn::save_checkpoint(result.model, checkpoint_path(out_dir));
  std::ostringstream csv;
  csv << "epoch,loss\n";
  for (std::size_t e = 0; e < result.losses.size(); ++e) {
    csv << e + 1 << "," << format_double(result.losses[e]) << "\n";
  }
  io::write_text_file(out_dir + "/pretrain_loss.csv", csv.str());
  log << "pretrained " << result.model.param_count() << " parameters ("
      << result.model.masked_count() << " trainable in CFL), "
      << result.losses.size() << " epochs";
  if (!result.losses.empty()) log << ", final loss " << format_double(result.losses.back());
  log << "\n";
  return kExitOk;
}

int cmd_simulate(const RunConfig& config, const std::string& out_dir, std::ostream& log) {
  const std::string dir = scenarios_dir(out_dir);
  ensure_dir(dir);
  int written = 0;
  for (int i = 0; i < config.n_scenarios; ++i) {
    try {
      const auto scenario = pipeline::make_scenario(config, i);
      io::write_json_file(dir + "/" + scenario_file_name(i), io::scenario_to_json(scenario));
      ++written;
    } catch (const ConstraintError& e) {
      log << "warning: scenario " << i << " skipped: " << e.what() << "\n";
    }
  }
  log << "wrote " << written << " of " << config.n_scenarios << " scenarios to " << dir
      << "\n";
  return written > 0 ? kExitOk : kExitFailure;
}

int cmd_run(const RunConfig& config, const RunOptions& options, std::ostream& log) {
  const std::string ckpt =
      options.checkpoint.empty() ? checkpoint_path(options.out_dir) : options.checkpoint;
  const std::string scen_dir =
      options.scenarios.empty() ? scenarios_dir(options.out_dir) : options.scenarios;

  nn::AutoencoderModel model = nn::load_checkpoint(ckpt);
  model.freeze_except_bottleneck();

  std::vector<Slot> slots;
  for (const auto& path : json_files(scen_dir, "scenario_")) {
    Slot s;
    s.name = path.stem().string();
    s.scenario = io::scenario_from_json(io::read_json_file(path.string()));
    slots.push_back(std::move(s));
  }
  if (slots.empty()) throw InvalidArgument("no scenario files in " + scen_dir);
  if (options.dry_run) {
    log << "dry run: " << slots.size() << " scenarios, checkpoint " << ckpt
        << ", results would go to " << results_dir(options.out_dir) << "\n";
    return kExitOk;
  }

  const std::string dir = results_dir(options.out_dir);
  ensure_dir(dir);
  std::mutex log_mutex;
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < slots.size(); i = next++) {
      Slot& s = slots[i];
      Json j;
      try {
        s.outcome = pipeline::run_scenario(static_cast<int>(i), s.scenario, model, config);
        j = io::outcome_to_json(*s.outcome);
        j["name"] = s.name;
      } catch (const std::exception& e) {
        s.error = e.what();
        j["schema_version"] = io::kSchemaVersion;
        j["kind"] = "scenario_result";
        j["index"] = i;
        j["seed"] = s.scenario.seed;
        j["status"] = "failed";
        j["error"] = s.error;
        j["name"] = s.name;
      }
      io::write_json_file(dir + "/" + s.name + ".json", j);
      std::lock_guard lock(log_mutex);
      if (s.outcome) {
        log << s.name << ": " << s.outcome->clusters.size() << " cluster(s), assignment "
            << std::fixed << std::setprecision(3) << s.outcome->eval.assignment_accuracy
            << std::defaultfloat << "\n";
      } else {
        log << s.name << ": failed: " << s.error << "\n";
      }
    }
  };
  const int workers = std::max(1, std::min<int>(config.workers, static_cast<int>(slots.size())));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  write_results(config, dir, slots);
  const bool any_ok = std::any_of(slots.begin(), slots.end(),
                                  [](const Slot& s) { return s.outcome.has_value(); });
  return any_ok ? kExitOk : kExitFailure;
}

int cmd_report(const std::string& results, std::ostream& out, std::ostream& log) {
  const std::string summary_path = results + "/summary.json";
  if (!fs::exists(summary_path)) {
    log << "error: no summary.json in " << results << "\n";
    return kExitInvalidInput;
  }
  const Json summary = io::read_json_file(summary_path);

  std::ostringstream rep;
  rep << std::fixed << std::setprecision(3);
  rep << "scenarios: " << summary.at("n_scenarios").get<int>()
      << "  ok: " << summary.at("n_ok").get<int>()
      << "  failed: " << summary.at("n_failed").get<int>()
      << "  split: " << summary.at("n_split").get<int>() << "\n";
  if (!summary.at("mean_assignment_accuracy").is_null()) {
    rep << "mean node-assignment accuracy: "
        << summary.at("mean_assignment_accuracy").get<double>() << "\n";
  }
  rep << "\nnormalized cluster-to-source distance (rows: sources, columns: clusters)\n";
  const Json& d = summary.at("d_tilde");
  if (d.is_null()) {
    rep << "  (no scenario produced two clusters)\n";
  } else {
    rep << "        c1      c2\n";
    for (int z = 0; z < 2; ++z) {
      rep << "  s" << z + 1 << "  " << d[0][z].get<double>() << "   " << d[1][z].get<double>()
          << "\n";
    }
  }
  const Json& fusion = summary.at("fusion");
  rep << "\nlabel fusion over split scenarios (rows: metric, columns: fusion)\n";
  if (fusion.empty()) {
    rep << "  no scenario split; fusion not scored\n";
  } else {
    rep << "        ";
    for (const auto& f : fusion) {
      std::string col = f.at("mode") == "plain_mode"
                            ? "no-MV"
                            : "v=" + format_double(f.at("v").get<double>());
      rep << std::setw(8) << col;
    }
    rep << "\n  Acc   ";
    for (const auto& f : fusion) rep << std::setw(8) << f.at("accuracy").get<double>();
    rep << "\n  F1    ";
    for (const auto& f : fusion) rep << std::setw(8) << f.at("f1").get<double>();
    rep << "\n";
  }

  std::ostringstream mu;
  mu << "scenario,node,cluster,mu,q_norm,r_norm,p,reference\n";
  for (const auto& path : json_files(results, "scenario_")) {
    const Json r = io::read_json_file(path.string());
    if (r.value("status", "") != "ok" || r.at("membership").is_null()) continue;
    const Json& m = r.at("membership");
    const auto ids = m.at("node_ids").get<std::vector<int>>();
    const auto ref = m.at("reference").get<std::vector<int>>();
    for (std::size_t k = 0; k < ids.size(); ++k) {
      const int c = m.at("cluster_of")[k].get<int>();
      mu << r.at("name").get<std::string>() << "," << ids[k] << "," << c << ","
         << format_double(m.at("mu")[k].get<double>()) << ","
         << format_double(m.at("q_norm")[k].get<double>()) << ","
         << format_double(m.at("r_norm")[k].get<double>()) << ","
         << format_double(m.at("p")[k].get<double>()) << ","
         << (ids[k] == ref[c] ? 1 : 0) << "\n";
    }
  }
  io::write_text_file(results + "/report.txt", rep.str());
  io::write_text_file(results + "/mu.csv", mu.str());
  out << rep.str();
  return kExitOk;
}

}  // namespace asncfl::commands
