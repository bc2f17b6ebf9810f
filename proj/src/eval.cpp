#include "asncfl/eval.hpp"

#include <algorithm>
#include <string>

#include "asncfl/errors.hpp"

namespace asncfl::eval {

Vec3 mv_weighted_centroid(std::span<const Vec3> positions, std::span<const double> mu) {
  if (positions.size() != mu.size()) throw ShapeError("positions and weights differ in length");
  double total = 0.0;
  Vec3 c{0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < positions.size(); ++i) {
    if (mu[i] < 0.0) throw InvalidArgument("negative membership weight");
    total += mu[i];
    c.x += mu[i] * positions[i].x;
    c.y += mu[i] * positions[i].y;
    c.z += mu[i] * positions[i].z;
  }
  if (!(total > 0.0)) throw InvalidArgument("membership weights sum to zero");
  return {c.x / total, c.y / total, c.z / total};
}

double normalized_cluster_distance(const Vec3& centroid, const Vec3& s_z,
                                   const Vec3& s1, const Vec3& s2) {
  const double base = acoustics::distance(s1, s2);
  if (!(base > 0.0)) throw InvalidArgument("sources coincide");
  return acoustics::distance(s_z, centroid) / base;
}

namespace {

std::size_t count_matches(const cfl::Cluster& c, std::span<const int> gt, int source) {
  std::size_t n = 0;
  for (int id : c) {
    if (id < 0 || static_cast<std::size_t>(id) >= gt.size()) {
      throw InvalidArgument("node " + std::to_string(id) + " has no ground truth");
    }
    if (gt[static_cast<std::size_t>(id)] == source) ++n;
  }
  return n;
}

}  // namespace

std::vector<int> match_clusters_to_sources(const std::vector<cfl::Cluster>& clusters,
                                           std::span<const int> ground_truth) {
  if (clusters.size() != 2) {
    throw InvalidArgument("assignment needs 2 clusters, got " +
                          std::to_string(clusters.size()));
  }
  const std::size_t straight = count_matches(clusters[0], ground_truth, 0) +
                               count_matches(clusters[1], ground_truth, 1);
  const std::size_t crossed = count_matches(clusters[0], ground_truth, 1) +
                              count_matches(clusters[1], ground_truth, 0);
  if (crossed > straight) return {1, 0};
  return {0, 1};
}

double assignment_accuracy(const std::vector<cfl::Cluster>& clusters,
                           std::span<const int> ground_truth) {
  const std::vector<int> m = match_clusters_to_sources(clusters, ground_truth);
  const std::size_t total = clusters[0].size() + clusters[1].size();
  if (total == 0) throw InvalidArgument("clusters are empty");
  const std::size_t hits = count_matches(clusters[0], ground_truth, m[0]) +
                           count_matches(clusters[1], ground_truth, m[1]);
  return static_cast<double>(hits) / static_cast<double>(total);
}

double assignment_accuracy_or_chance(const std::vector<cfl::Cluster>& clusters,
                                     std::span<const int> ground_truth) {
  if (clusters.size() == 1) return 0.5;
  return assignment_accuracy(clusters, ground_truth);
}

int mode_label(std::span<const int> labels) {
  std::size_t ones = 0;
  for (int l : labels) {
    if (l != 0 && l != 1) throw InvalidArgument("labels must be binary");
    if (l == 1) ++ones;
  }
  return 2 * ones > labels.size() ? 1 : 0;
}

std::vector<ClusterPrediction> fuse_node_labels(std::span<const NodeLabel> labels,
                                                const std::vector<cfl::Cluster>& clusters,
                                                std::span<const double> mu,
                                                FusionMode mode) {
  if (mode == FusionMode::mv_weighted && mu.size() != labels.size()) {
    throw ShapeError("labels and membership values differ in length");
  }
  std::vector<ClusterPrediction> out;
  for (const cfl::Cluster& c : clusters) {
    if (c.empty()) throw InvalidArgument("empty cluster");
    std::vector<int> ls;
    for (int id : c) {
      if (id < 0 || static_cast<std::size_t>(id) >= labels.size()) {
        throw InvalidArgument("node " + std::to_string(id) + " has no label");
      }
      ls.push_back(labels[static_cast<std::size_t>(id)].label);
    }
    ClusterPrediction pred;
    pred.label = mode_label(ls);
    if (mode == FusionMode::mv_weighted) {
      double num = 0.0, den = 0.0;
      for (int id : c) {
        const auto i = static_cast<std::size_t>(id);
        num += mu[i] * labels[i].label;
        den += mu[i];
      }
      if (den > 0.0) {
        pred.label = num / den >= 0.5 ? 1 : 0;
      } else {
        pred.fell_back = true;
      }
    }
    out.push_back(pred);
  }
  return out;
}

FusionScore score_fusion(std::span<const ScenarioPredictions> scenarios) {
  if (scenarios.empty()) throw InvalidArgument("no scenarios to score");
  FusionScore sum;
  for (const ScenarioPredictions& s : scenarios) {
    if (s.predicted.size() != s.truth.size() || s.predicted.empty()) {
      throw ShapeError("predictions and truth differ in length");
    }
    std::size_t correct = 0, tp = 0, fp = 0, fn = 0;
    for (std::size_t k = 0; k < s.predicted.size(); ++k) {
      const int p = s.predicted[k], t = s.truth[k];
      if (p == t) ++correct;
      if (p == 1 && t == 1) ++tp;
      if (p == 1 && t == 0) ++fp;
      if (p == 0 && t == 1) ++fn;
    }
    sum.accuracy += static_cast<double>(correct) / static_cast<double>(s.predicted.size());
    const std::size_t denom = 2 * tp + fp + fn;
    sum.f1 += denom == 0 ? 1.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
  }
  const double n = static_cast<double>(scenarios.size());
  return {sum.accuracy / n, sum.f1 / n};
}

double DistanceLabeler::error_probability(double distance) const {
  const double d2 = distance * distance;
  return p_max * d2 / (d2 + d0 * d0);
}

NodeLabel DistanceLabeler::label(int truth, double distance, Rng& rng) const {
  if (truth != 0 && truth != 1) throw InvalidArgument("labels must be binary");
  if (utterances < 1) throw InvalidArgument("labeler needs at least one utterance");
  const double p = error_probability(distance);
  int ones = 0;
  for (int u = 0; u < utterances; ++u) {
    const int pred = rng.bernoulli(p) ? 1 - truth : truth;
    ones += pred;
  }
  NodeLabel out;
  out.label = 2 * ones > utterances ? 1 : 0;
  const int winners = out.label == 1 ? ones : utterances - ones;
  out.confidence = static_cast<double>(winners) / utterances;
  return out;
}

}  // namespace asncfl::eval
