#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "asncfl/acoustics.hpp"
#include "asncfl/cfl.hpp"
#include "asncfl/eval.hpp"
#include "asncfl/features.hpp"

namespace asncfl {

struct RunConfig {
  std::uint64_t seed = 1;

  // scenario
  int nodes = 16;
  double room_x = 4.7;
  double room_y = 3.4;
  double room_z = 2.4;
  double t60 = 0.34;
  double utterance_seconds = 10.0;
  int clips_per_client = 1;
  int n_scenarios = 20;

  // features
  double win_s = 0.064;
  double hop_s = 0.032;
  int mel_filters = 128;

  // clustering
  double eps1 = 0.0134;
  double eps2 = 0.005;
  double eps3 = 0.0007;
  int max_rounds = 25;
  double lr = 0.1;
  bool recursive = false;

  // membership
  double lambda = 0.5;
  std::vector<double> v_list{0.0, 0.5, 0.9};

  // pretraining
  int pretrain_epochs = 30;
  int pretrain_segments = 256;
  double pretrain_lr = 1.0;

  // downstream labeler
  int utterances_per_node = 16;
  double labeler_p_max = 0.45;
  double labeler_d0 = 1.0;
  int fusion_trials = 25;

  int workers = 1;
  std::string out = "out";

  acoustics::ScenarioParams scenario_params() const;
  features::LmbeParams lmbe_params() const;
  cfl::CflConfig cfl_config(std::uint64_t run_seed) const;
  eval::DistanceLabeler labeler() const;

  // Throws InvalidArgument naming the offending key.
  void validate() const;

  bool operator==(const RunConfig&) const = default;
};

// Flat `key = value` lines; '#' starts a comment; unknown keys and
// malformed values throw InvalidArgument. Missing keys keep their defaults.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

// Every key, in a fixed order, with values that parse back exactly.
std::string serialize_config(const RunConfig& config);

}  // namespace asncfl
