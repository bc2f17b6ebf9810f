#pragma once

#include <string>

#include <json.hpp>

#include "asncfl/acoustics.hpp"
#include "asncfl/cfl.hpp"
#include "asncfl/eval.hpp"
#include "asncfl/membership.hpp"
#include "asncfl/pipeline.hpp"

namespace asncfl::io {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

Json scenario_to_json(const acoustics::Scenario& scenario);
// Checks schema_version and field shapes, then validate_scenario().
acoustics::Scenario scenario_from_json(const Json& j);

Json round_log_to_json(const cfl::RoundLog& log);
Json membership_to_json(const membership::MembershipReport& report);
Json eval_to_json(const eval::EvalResult& result);
Json outcome_to_json(const pipeline::ScenarioOutcome& outcome);

std::string fusion_mode_name(eval::FusionMode mode);

// Shortest text that parses back to the same double.
std::string format_double(double v);

Json read_json_file(const std::string& path);
// Pretty-printed, trailing newline.
void write_json_file(const std::string& path, const Json& j);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace asncfl::io
