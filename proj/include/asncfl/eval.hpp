#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "asncfl/acoustics.hpp"
#include "asncfl/cfl.hpp"
#include "asncfl/rng.hpp"

namespace asncfl::eval {

using acoustics::Vec3;

Vec3 mv_weighted_centroid(std::span<const Vec3> positions, std::span<const double> mu);

double normalized_cluster_distance(const Vec3& centroid, const Vec3& s_z,
                                   const Vec3& s1, const Vec3& s2);

// ground_truth[id] is the dominant source of node `id`. Requires exactly
// two clusters.
double assignment_accuracy(const std::vector<cfl::Cluster>& clusters,
                           std::span<const int> ground_truth);

// Same, but a single cluster scores 0.5.
double assignment_accuracy_or_chance(const std::vector<cfl::Cluster>& clusters,
                                     std::span<const int> ground_truth);

// Cluster index -> source index under the better bijection (identity on ties).
std::vector<int> match_clusters_to_sources(const std::vector<cfl::Cluster>& clusters,
                                           std::span<const int> ground_truth);

// Majority vote over binary labels, ties -> 0.
int mode_label(std::span<const int> labels);

enum class FusionMode { plain_mode, mv_weighted };

struct NodeLabel {
  int label = 0;
  double confidence = 1.0;
};

struct ClusterPrediction {
  int label = 0;
  bool fell_back = false;  // mv-weighted with all mu zero -> plain-mode
};

// labels and mu are indexed by node id; mu is already thresholded.
std::vector<ClusterPrediction> fuse_node_labels(std::span<const NodeLabel> labels,
                                                const std::vector<cfl::Cluster>& clusters,
                                                std::span<const double> mu,
                                                FusionMode mode);

struct ScenarioPredictions {
  std::vector<int> predicted;
  std::vector<int> truth;
};

struct FusionScore {
  double accuracy = 0.0;
  double f1 = 0.0;
};

// Per-scenario accuracy and binary F1 (class 1 positive), averaged over
// scenarios. A scenario with no positives predicted or present has F1 = 1.
FusionScore score_fusion(std::span<const ScenarioPredictions> scenarios);

// Node-level classifier stand-in: each of `utterances` predictions is wrong
// with probability p_max * d^2 / (d^2 + d0^2), d = distance to the node's
// dominant source. The node label is the mode of those predictions and the
// confidence is the winning fraction.
struct DistanceLabeler {
  int utterances = 16;
  double p_max = 0.45;
  double d0 = 1.0;

  double error_probability(double distance) const;
  NodeLabel label(int truth, double distance, Rng& rng) const;
};

struct FusionEntry {
  FusionMode mode = FusionMode::plain_mode;
  double v = 0.0;  // ignored for plain-mode
  FusionScore score;
};

struct EvalResult {
  double d_tilde[2][2] = {{0.0, 0.0}, {0.0, 0.0}};  // [cluster][source]
  bool has_d_tilde = false;
  double assignment_accuracy = 0.0;
  std::vector<FusionEntry> fusion;
};

}  // namespace asncfl::eval
