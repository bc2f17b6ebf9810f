#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "asncfl/nn.hpp"
#include "asncfl/vecspace.hpp"

namespace asncfl::cfl {

using Cluster = std::vector<int>;  // ascending client ids

struct Thresholds {
  double eps1 = 0.0134;  // upper bound on the norm of the mean update
  double eps2 = 0.005;   // lower bound on the largest client update norm
  double eps3 = 0.0007;  // upper bound on |round-to-round change of eps1 stat|
};

struct CflConfig {
  Thresholds thresholds;
  int max_rounds = 25;
  double lr = 0.1;
  std::uint64_t seed = 0;
  // Keep splitting child clusters in later rounds instead of stopping after
  // the first split.
  bool recursive = false;
  // Parallel client updates within a round; results do not depend on it.
  int workers = 1;
};

struct ClientData {
  int id = 0;
  std::vector<nn::FeatureSegment> segments;
};

struct CongruenceStats {
  double mean_norm = 0.0;
  double max_norm = 0.0;
  // Backward difference of mean_norm over consecutive rounds of the same
  // cluster; empty on the cluster's first round.
  std::optional<double> grad;
};

// Loads theta into the model's trainable slot and runs one masked SGD epoch.
ParamVector client_update(nn::AutoencoderModel& model, const ParamVector& theta,
                          std::span<const nn::FeatureSegment> data, double lr);

struct WeightedDelta {
  int client_id = 0;
  ParamVector delta;
  std::size_t data_size = 0;
};

// theta + sum_i (|D_i| / sum|D|) delta_i, summed in ascending client id.
ParamVector cluster_aggregate(const ParamVector& theta,
                              std::span<const WeightedDelta> deltas);

CongruenceStats congruence_stats(std::span<const ParamVector> deltas,
                                 std::optional<double> previous_mean_norm);

bool should_split(const CongruenceStats& stats, const Thresholds& t);

struct Bipartition {
  Cluster c1;  // holds the lowest client id
  Cluster c2;
  double max_cross = 0.0;
};

double max_cross_similarity(const SimilarityMatrix& a, const Cluster& c1,
                            const Cluster& c2);

// Single-linkage agglomeration down to two clusters (equivalently: cut the
// weakest edge of a maximum spanning tree). Minimizes the maximum
// cross-cluster similarity.
Bipartition bipartition(const SimilarityMatrix& a);

// Exhaustive search over all 2^(M-1)-1 splits, 2 <= M <= 20. Ties go to the
// lexicographically smallest c1.
Bipartition brute_force_bipartition(const SimilarityMatrix& a);

struct ClusterRoundStats {
  Cluster members;
  CongruenceStats stats;
  bool split = false;
};

struct SplitEvent {
  int round = 0;
  Cluster parent;
  Cluster c1;
  Cluster c2;
  SimilarityMatrix similarity;
  std::vector<ParamVector> deltas;  // per client of parent, in member order
};

struct RoundRecord {
  int round = 0;
  std::vector<ClusterRoundStats> clusters;
};

struct RoundLog {
  std::vector<RoundRecord> rounds;
  std::vector<SplitEvent> splits;
  bool no_split = true;
};

struct CflResult {
  std::vector<Cluster> clusters;
  std::vector<ParamVector> thetas;
  RoundLog log;
};

// The unsupervised CFL loop. `model` must be pretrained and frozen except
// for the bottleneck weights; a private copy is trained.
CflResult run_unsupervised_cfl(std::span<const ClientData> clients,
                               const nn::AutoencoderModel& model,
                               const CflConfig& config);

}  // namespace asncfl::cfl
