#include "asncfl/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "asncfl/errors.hpp"

namespace asncfl {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  const auto res = std::from_chars(value.data(), end, out);
  if (res.ec != std::errc() || res.ptr != end) {
    throw InvalidArgument("config key '" + key + "': cannot parse '" + value + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw InvalidArgument("config key '" + key + "': expected true or false, got '" +
                        value + "'");
}

std::vector<double> parse_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<double>(key, trim(item)));
  return out;
}

struct Field {
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
Field number_field(T RunConfig::*member) {
  return {[member](RunConfig& c, const std::string& k, const std::string& v) {
            c.*member = parse_number<T>(k, v);
          },
          [member](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<T>) {
              return format_double(c.*member);
            } else {
              return std::to_string(c.*member);
            }
          }};
}

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"seed", number_field(&RunConfig::seed)},
      {"nodes", number_field(&RunConfig::nodes)},
      {"room_x", number_field(&RunConfig::room_x)},
      {"room_y", number_field(&RunConfig::room_y)},
      {"room_z", number_field(&RunConfig::room_z)},
      {"t60", number_field(&RunConfig::t60)},
      {"utterance_seconds", number_field(&RunConfig::utterance_seconds)},
      {"clips_per_client", number_field(&RunConfig::clips_per_client)},
      {"n_scenarios", number_field(&RunConfig::n_scenarios)},
      {"win_s", number_field(&RunConfig::win_s)},
      {"hop_s", number_field(&RunConfig::hop_s)},
      {"mel_filters", number_field(&RunConfig::mel_filters)},
      {"eps1", number_field(&RunConfig::eps1)},
      {"eps2", number_field(&RunConfig::eps2)},
      {"eps3", number_field(&RunConfig::eps3)},
      {"max_rounds", number_field(&RunConfig::max_rounds)},
      {"lr", number_field(&RunConfig::lr)},
      {"recursive",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.recursive = parse_bool(k, v);
        },
        [](const RunConfig& c) { return std::string(c.recursive ? "true" : "false"); }}},
      {"lambda", number_field(&RunConfig::lambda)},
      {"v_list",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.v_list = parse_list(k, v);
        },
        [](const RunConfig& c) {
          std::string s;
          for (std::size_t i = 0; i < c.v_list.size(); ++i) {
            if (i) s += ",";
            s += format_double(c.v_list[i]);
          }
          return s;
        }}},
      {"pretrain_epochs", number_field(&RunConfig::pretrain_epochs)},
      {"pretrain_segments", number_field(&RunConfig::pretrain_segments)},
      {"pretrain_lr", number_field(&RunConfig::pretrain_lr)},
      {"utterances_per_node", number_field(&RunConfig::utterances_per_node)},
      {"labeler_p_max", number_field(&RunConfig::labeler_p_max)},
      {"labeler_d0", number_field(&RunConfig::labeler_d0)},
      {"fusion_trials", number_field(&RunConfig::fusion_trials)},
      {"workers", number_field(&RunConfig::workers)},
      {"out",
       {[](RunConfig& c, const std::string&, const std::string& v) { c.out = v; },
        [](const RunConfig& c) { return c.out; }}},
  };
  return table;
}

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw InvalidArgument("config key '" + key + "': " + what);
}

}  // namespace

acoustics::ScenarioParams RunConfig::scenario_params() const {
  acoustics::ScenarioParams p;
  p.room = {room_x, room_y, room_z};
  p.t60 = t60;
  p.nodes = nodes;
  p.utterances = clips_per_client;
  p.utterance_seconds = utterance_seconds;
  return p;
}

features::LmbeParams RunConfig::lmbe_params() const {
  features::LmbeParams p;
  p.win_s = win_s;
  p.hop_s = hop_s;
  return p;
}

cfl::CflConfig RunConfig::cfl_config(std::uint64_t run_seed) const {
  cfl::CflConfig c;
  c.thresholds = {eps1, eps2, eps3};
  c.max_rounds = max_rounds;
  c.lr = lr;
  c.seed = run_seed;
  c.recursive = recursive;
  return c;
}

eval::DistanceLabeler RunConfig::labeler() const {
  return {utterances_per_node, labeler_p_max, labeler_d0};
}

void RunConfig::validate() const {
  require(nodes >= 2 * acoustics::kNodesPerSourceInRc, "nodes",
          "must be >= " + std::to_string(2 * acoustics::kNodesPerSourceInRc));
  require(room_x > 0 && room_y > 0 && room_z > 0, "room_x", "room dimensions must be > 0");
  require(t60 > 0, "t60", "must be > 0");
  require(utterance_seconds > 0, "utterance_seconds", "must be > 0");
  require(clips_per_client >= 1, "clips_per_client", "must be >= 1");
  require(n_scenarios >= 1, "n_scenarios", "must be >= 1");
  require(win_s > 0 && hop_s > 0, "win_s", "window and hop must be > 0");
  require(mel_filters >= 2, "mel_filters", "must be >= 2");
  require(eps1 >= 0 && eps2 >= 0 && eps3 >= 0, "eps1", "thresholds must be >= 0");
  require(max_rounds >= 1, "max_rounds", "must be >= 1");
  require(lr >= 0, "lr", "must be >= 0");
  require(lambda >= 0 && lambda <= 1, "lambda", "must be in [0, 1]");
  for (double v : v_list) require(v >= 0 && v <= 1, "v_list", "entries must be in [0, 1]");
  require(pretrain_epochs >= 0, "pretrain_epochs", "must be >= 0");
  require(pretrain_segments >= 1, "pretrain_segments", "must be >= 1");
  require(pretrain_lr >= 0, "pretrain_lr", "must be >= 0");
  require(utterances_per_node >= 1, "utterances_per_node", "must be >= 1");
  require(labeler_p_max >= 0 && labeler_p_max <= 1, "labeler_p_max", "must be in [0, 1]");
  require(labeler_d0 > 0, "labeler_d0", "must be > 0");
  require(fusion_trials >= 1, "fusion_trials", "must be >= 1");
  require(workers >= 1, "workers", "must be >= 1");
  require(!out.empty(), "out", "must not be empty");
}

RunConfig parse_config(const std::string& text) {
  std::map<std::string, const Field*> index;
  for (const auto& [name, field] : fields()) index[name] = &field;
  RunConfig config;
  std::stringstream ss(text);
  std::string line;
  int line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw InvalidArgument("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = index.find(key);
    if (it == index.end()) throw InvalidArgument("unknown config key '" + key + "'");
    it->second->set(config, key, value);
  }
  config.validate();
  return config;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot read config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string serialize_config(const RunConfig& config) {
  std::string out;
  for (const auto& [name, field] : fields()) out += name + " = " + field.get(config) + "\n";
  return out;
}

}  // namespace asncfl
