#pragma once

#include <span>
#include <vector>

#include "asncfl/cfl.hpp"
#include "asncfl/vecspace.hpp"

namespace asncfl::membership {

// Per-row (matrix order) mean intra-cluster similarity q and mean
// cross-cluster similarity r. q is undefined for members of a singleton.
struct MeanSimilarities {
  std::vector<double> q;
  std::vector<double> r;
  std::vector<bool> q_defined;
};

MeanSimilarities mean_similarities(const SimilarityMatrix& a,
                                   const cfl::Cluster& c1,
                                   const cfl::Cluster& c2);

// Min-max normalization; a constant vector becomes `constant_value`.
void minmax_normalize(std::vector<double>& v, double constant_value);

// lambda * norm(q) + (1 - lambda) * norm(r), normalized within one cluster.
std::vector<double> fused_scores(std::span<const double> q,
                                 std::span<const double> r, double lambda);

struct MembershipReport {
  std::vector<int> node_ids;    // matrix row order
  std::vector<int> cluster_of;  // 0 -> c1, 1 -> c2
  std::vector<double> q_norm;   // normalized q (0.5 for singletons)
  std::vector<double> r_norm;
  std::vector<double> p;
  std::vector<double> raw_mu;   // a(i, reference)
  std::vector<double> mu;       // normalized, then thresholded
  int reference[2] = {-1, -1};  // node id per cluster
  double lambda = 0.5;
  double v = 0.0;
  std::vector<int> zeroed;      // node ids set to 0 by thresholding

  double mu_of(int node_id) const;
};

// Reference node = argmin p per cluster (lowest id on ties); mu_i is the
// similarity to the reference, min-max normalized within the cluster.
// A singleton's node gets mu = 1; a cluster whose raw mu is constant gets
// mu = 1 everywhere.
MembershipReport membership_values(const SimilarityMatrix& a,
                                   const cfl::Cluster& c1,
                                   const cfl::Cluster& c2, double lambda);

// mu_i <= v -> 0.
MembershipReport threshold_mvs(MembershipReport report, double v);

}  // namespace asncfl::membership
