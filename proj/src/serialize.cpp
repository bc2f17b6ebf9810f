#include "asncfl/serialize.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "asncfl/errors.hpp"

namespace asncfl::io {

namespace {

Json vec3_to_json(const acoustics::Vec3& v) { return Json::array({v.x, v.y, v.z}); }

acoustics::Vec3 vec3_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 3) throw FormatError("position must be [x, y, z]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Json stats_to_json(const cfl::CongruenceStats& s) {
  Json j;
  j["mean_norm"] = s.mean_norm;
  j["max_norm"] = s.max_norm;
  j["grad"] = s.grad ? Json(*s.grad) : Json(nullptr);
  return j;
}

Json matrix_to_json(const SimilarityMatrix& a) {
  Json rows = Json::array();
  for (std::size_t i = 0; i < a.size(); ++i) {
    Json row = Json::array();
    for (std::size_t k = 0; k < a.size(); ++k) row.push_back(a.at(i, k));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string fusion_mode_name(eval::FusionMode mode) {
  return mode == eval::FusionMode::plain_mode ? "plain_mode" : "mv_weighted";
}

Json scenario_to_json(const acoustics::Scenario& s) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "scenario";
  j["seed"] = s.seed;
  j["room"] = Json::array({s.room.x, s.room.y, s.room.z});
  j["t60"] = s.t60;
  j["utterance_seconds"] = s.utterance_seconds;
  Json sources = Json::array();
  for (const auto& src : s.sources) {
    Json o;
    o["position"] = vec3_to_json(src.position);
    o["kind"] = src.kind;
    o["utterance_seeds"] = src.utterance_seeds;
    sources.push_back(std::move(o));
  }
  j["sources"] = std::move(sources);
  Json nodes = Json::array();
  for (const auto& n : s.nodes) nodes.push_back(vec3_to_json(n));
  j["nodes"] = std::move(nodes);
  j["rir_seeds"] = s.rir_seeds;
  return j;
}

acoustics::Scenario scenario_from_json(const Json& j) {
  try {
    if (j.at("schema_version").get<int>() != kSchemaVersion) {
      throw FormatError("unsupported scenario schema_version");
    }
    if (j.at("kind").get<std::string>() != "scenario") throw FormatError("not a scenario file");
    acoustics::Scenario s;
    s.seed = j.at("seed").get<std::uint64_t>();
    const auto room = vec3_from_json(j.at("room"));
    s.room = {room.x, room.y, room.z};
    s.t60 = j.at("t60").get<double>();
    s.utterance_seconds = j.at("utterance_seconds").get<double>();
    for (const auto& o : j.at("sources")) {
      acoustics::Source src;
      src.position = vec3_from_json(o.at("position"));
      src.kind = o.at("kind").get<int>();
      src.utterance_seeds = o.at("utterance_seeds").get<std::vector<std::uint64_t>>();
      s.sources.push_back(std::move(src));
    }
    for (const auto& n : j.at("nodes")) s.nodes.push_back(vec3_from_json(n));
    s.rir_seeds = j.at("rir_seeds").get<std::vector<std::vector<std::uint64_t>>>();
    acoustics::validate_scenario(s);
    return s;
  } catch (const Json::exception& e) {
    throw FormatError(std::string("malformed scenario: ") + e.what());
  } catch (const ConstraintError& e) {
    throw FormatError(std::string("invalid scenario: ") + e.what());
  }
}

Json round_log_to_json(const cfl::RoundLog& log) {
  Json j;
  Json rounds = Json::array();
  for (const auto& r : log.rounds) {
    Json rj;
    rj["round"] = r.round;
    Json clusters = Json::array();
    for (const auto& c : r.clusters) {
      Json cj = stats_to_json(c.stats);
      cj["members"] = c.members;
      cj["split"] = c.split;
      clusters.push_back(std::move(cj));
    }
    rj["clusters"] = std::move(clusters);
    rounds.push_back(std::move(rj));
  }
  j["rounds"] = std::move(rounds);
  Json splits = Json::array();
  for (const auto& s : log.splits) {
    Json sj;
    sj["round"] = s.round;
    sj["parent"] = s.parent;
    sj["c1"] = s.c1;
    sj["c2"] = s.c2;
    sj["client_ids"] = s.similarity.client_ids();
    sj["similarity"] = matrix_to_json(s.similarity);
    Json norms = Json::array();
    for (const auto& d : s.deltas) norms.push_back(norm(d));
    sj["update_norms"] = std::move(norms);
    splits.push_back(std::move(sj));
  }
  j["splits"] = std::move(splits);
  j["no_split"] = log.no_split;
  return j;
}

Json membership_to_json(const membership::MembershipReport& r) {
  Json j;
  j["lambda"] = r.lambda;
  j["v"] = r.v;
  j["reference"] = Json::array({r.reference[0], r.reference[1]});
  j["node_ids"] = r.node_ids;
  j["cluster_of"] = r.cluster_of;
  j["q_norm"] = r.q_norm;
  j["r_norm"] = r.r_norm;
  j["p"] = r.p;
  j["raw_mu"] = r.raw_mu;
  j["mu"] = r.mu;
  j["zeroed"] = r.zeroed;
  return j;
}

Json eval_to_json(const eval::EvalResult& r) {
  Json j;
  if (r.has_d_tilde) {
    j["d_tilde"] = Json::array({Json::array({r.d_tilde[0][0], r.d_tilde[0][1]}),
                                Json::array({r.d_tilde[1][0], r.d_tilde[1][1]})});
  } else {
    j["d_tilde"] = nullptr;
  }
  j["assignment_accuracy"] = r.assignment_accuracy;
  Json fusion = Json::array();
  for (const auto& f : r.fusion) {
    Json fj;
    fj["mode"] = fusion_mode_name(f.mode);
    fj["v"] = f.mode == eval::FusionMode::plain_mode ? Json(nullptr) : Json(f.v);
    fj["accuracy"] = f.score.accuracy;
    fj["f1"] = f.score.f1;
    fusion.push_back(std::move(fj));
  }
  j["fusion"] = std::move(fusion);
  return j;
}

Json outcome_to_json(const pipeline::ScenarioOutcome& o) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "scenario_result";
  j["index"] = o.index;
  j["seed"] = o.seed;
  j["status"] = "ok";
  j["dominant_source"] = o.dominant;
  j["node_truth"] = o.node_truth;
  j["clusters"] = o.clusters;
  j["mu"] = o.mu;
  j["round_log"] = round_log_to_json(o.cfl.log);
  j["membership"] = o.membership ? membership_to_json(*o.membership) : Json(nullptr);
  j["eval"] = eval_to_json(o.eval);
  return j;
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read " + path);
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  out << text;
  if (!out) throw Error("failed writing " + path);
}

void write_json_file(const std::string& path, const Json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

}  // namespace asncfl::io
