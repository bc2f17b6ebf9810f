#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "asncfl/acoustics.hpp"
#include "asncfl/cfl.hpp"
#include "asncfl/config.hpp"
#include "asncfl/eval.hpp"
#include "asncfl/membership.hpp"
#include "asncfl/nn.hpp"

namespace asncfl::pipeline {

// Scenario `index` of a batch uses seed config.seed + index.
acoustics::Scenario make_scenario(const RunConfig& config, int index);

// One client per node; its data are the LMBE segments of every utterance
// pair of the scenario rendered at that node.
std::vector<cfl::ClientData> build_clients(const acoustics::Scenario& scenario,
                                           const RunConfig& config);

// Node segments from scenarios independent of the evaluation batch.
std::vector<nn::FeatureSegment> pretraining_corpus(const RunConfig& config);

struct PretrainResult {
  nn::AutoencoderModel model;
  std::vector<double> losses;  // per epoch
};

PretrainResult pretrain_model(const RunConfig& config);

struct ScenarioOutcome {
  int index = 0;
  std::uint64_t seed = 0;
  std::vector<int> dominant;     // per node
  std::vector<int> node_truth;   // class label of the node's dominant source
  cfl::CflResult cfl;
  // Clusters reordered so that cluster x is matched to source x.
  std::vector<cfl::Cluster> clusters;
  std::optional<membership::MembershipReport> membership;
  std::vector<double> mu;        // per node, before thresholding
  eval::EvalResult eval;
  // Parallel to eval.fusion.
  std::vector<eval::ScenarioPredictions> predictions;
};

ScenarioOutcome run_scenario(int index, const acoustics::Scenario& scenario,
                             const nn::AutoencoderModel& pretrained,
                             const RunConfig& config);

// Fusion scores over the scenarios that split into two clusters, in the
// order of their fusion entries; empty if none split.
std::vector<eval::FusionEntry> aggregate_fusion(
    const std::vector<const ScenarioOutcome*>& outcomes);

}  // namespace asncfl::pipeline
