#include "asncfl/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "asncfl/errors.hpp"
#include "asncfl/features.hpp"
#include "asncfl/rng.hpp"

namespace asncfl::pipeline {

namespace {

constexpr std::uint64_t kCorpusStream = 0xC0C0;
constexpr std::uint64_t kModelStream = 0x30DE;
constexpr std::uint64_t kCflStream = 0xCF1;
constexpr std::uint64_t kLabelStream = 0x1ABE;

int fft_size(const RunConfig& config) {
  return static_cast<int>(std::lround(config.win_s * features::kSampleRate));
}

std::vector<std::vector<nn::FeatureSegment>> node_segments(
    const acoustics::Scenario& scenario, const features::MelFilterbank& fb,
    const features::LmbeParams& params) {
  std::vector<std::vector<nn::FeatureSegment>> out(scenario.nodes.size());
  const auto& s1 = scenario.sources[0];
  const auto& s2 = scenario.sources[1];
  for (std::size_t u = 0; u < s1.utterance_seeds.size(); ++u) {
    const auto a = acoustics::synth_source_signal(s1.kind, s1.utterance_seeds[u],
                                                  scenario.utterance_seconds);
    const auto b = acoustics::synth_source_signal(s2.kind, s2.utterance_seeds[u],
                                                  scenario.utterance_seconds);
    const auto signals = acoustics::render_all_nodes(scenario, a, b);
    for (std::size_t n = 0; n < signals.size(); ++n) {
      for (auto& seg :
           features::lmbe_segments(signals[n], fb, params, static_cast<int>(n))) {
        seg.segment_index = static_cast<int>(out[n].size());
        out[n].push_back(std::move(seg));
      }
    }
  }
  return out;
}

// Ordering of the final clusters: matched to sources when there are two.
std::vector<cfl::Cluster> order_clusters(const std::vector<cfl::Cluster>& clusters,
                                         const std::vector<int>& dominant) {
  if (clusters.size() != 2) return clusters;
  const auto m = eval::match_clusters_to_sources(clusters, dominant);
  return m[0] == 0 ? clusters : std::vector<cfl::Cluster>{clusters[1], clusters[0]};
}

}  // namespace

acoustics::Scenario make_scenario(const RunConfig& config, int index) {
  return acoustics::generate_scenario(config.seed + static_cast<std::uint64_t>(index),
                                      config.scenario_params());
}

std::vector<cfl::ClientData> build_clients(const acoustics::Scenario& scenario,
                                           const RunConfig& config) {
  const auto fb = features::mel_filterbank(config.mel_filters, fft_size(config),
                                           features::kSampleRate);
  auto segments = node_segments(scenario, fb, config.lmbe_params());
  std::vector<cfl::ClientData> clients;
  for (std::size_t n = 0; n < segments.size(); ++n) {
    clients.push_back({static_cast<int>(n), std::move(segments[n])});
  }
  return clients;
}

std::vector<nn::FeatureSegment> pretraining_corpus(const RunConfig& config) {
  const auto fb = features::mel_filterbank(config.mel_filters, fft_size(config),
                                           features::kSampleRate);
  acoustics::ScenarioParams params = config.scenario_params();
  params.utterances = 1;
  std::vector<nn::FeatureSegment> corpus;
  const auto target = static_cast<std::size_t>(config.pretrain_segments);
  for (std::uint64_t k = 0; corpus.size() < target; ++k) {
    const auto scenario =
        acoustics::generate_scenario(derive_seed(config.seed, kCorpusStream, k), params);
    for (auto& node : node_segments(scenario, fb, config.lmbe_params())) {
      for (auto& seg : node) {
        if (corpus.size() < target) corpus.push_back(std::move(seg));
      }
    }
  }
  return corpus;
}

PretrainResult pretrain_model(const RunConfig& config) {
  PretrainResult out{nn::build_autoencoder(derive_seed(config.seed, kModelStream)), {}};
  if (config.pretrain_epochs > 0) {
    const auto corpus = pretraining_corpus(config);
    out.losses = nn::pretrain(out.model, corpus, config.pretrain_epochs, config.pretrain_lr);
  }
  out.model.freeze_except_bottleneck();
  return out;
}

ScenarioOutcome run_scenario(int index, const acoustics::Scenario& scenario,
                             const nn::AutoencoderModel& pretrained,
                             const RunConfig& config) {
  ScenarioOutcome out;
  out.index = index;
  out.seed = scenario.seed;
  const int m = static_cast<int>(scenario.nodes.size());
  for (int n = 0; n < m; ++n) {
    out.dominant.push_back(acoustics::dominant_source(scenario, n));
    out.node_truth.push_back(scenario.sources[out.dominant.back()].kind);
  }

  const auto clients = build_clients(scenario, config);
  out.cfl = cfl::run_unsupervised_cfl(
      clients, pretrained, config.cfl_config(derive_seed(scenario.seed, kCflStream)));
  out.clusters = order_clusters(out.cfl.clusters, out.dominant);
  if (out.clusters.size() > 2) {
    throw InvalidArgument("evaluation supports at most 2 clusters, got " +
                          std::to_string(out.clusters.size()));
  }

  out.mu.assign(static_cast<std::size_t>(m), 1.0);
  if (out.clusters.size() == 2) {
    const cfl::SplitEvent& split = out.cfl.log.splits.front();
    out.membership = membership::membership_values(split.similarity, out.clusters[0],
                                                   out.clusters[1], config.lambda);
    for (int n = 0; n < m; ++n) out.mu[n] = out.membership->mu_of(n);
  }

  eval::EvalResult& ev = out.eval;
  ev.assignment_accuracy = eval::assignment_accuracy_or_chance(out.clusters, out.dominant);
  if (out.clusters.size() == 2) {
    ev.has_d_tilde = true;
    const auto& src = scenario.sources;
    for (int x = 0; x < 2; ++x) {
      std::vector<eval::Vec3> pos;
      std::vector<double> w;
      for (int id : out.clusters[x]) {
        pos.push_back(scenario.nodes[id]);
        w.push_back(out.mu[id]);
      }
      const auto centroid = eval::mv_weighted_centroid(pos, w);
      for (int z = 0; z < 2; ++z) {
        ev.d_tilde[x][z] = eval::normalized_cluster_distance(
            centroid, src[z].position, src[0].position, src[1].position);
      }
    }
  }

  // Fusion modes: plain-mode, then mv-weighted for every v.
  std::vector<std::vector<double>> mus;  // per mv entry, per node
  ev.fusion.push_back({eval::FusionMode::plain_mode, 0.0, {}});
  mus.push_back(out.mu);
  for (double v : config.v_list) {
    ev.fusion.push_back({eval::FusionMode::mv_weighted, v, {}});
    std::vector<double> mu = out.mu;
    if (out.membership) {
      const auto th = membership::threshold_mvs(*out.membership, v);
      for (int n = 0; n < m; ++n) mu[n] = th.mu_of(n);
    }
    mus.push_back(std::move(mu));
  }
  std::vector<int> cluster_truth;
  for (const auto& c : out.clusters) {
    std::vector<int> labels;
    for (int id : c) labels.push_back(out.node_truth[id]);
    cluster_truth.push_back(eval::mode_label(labels));
  }
  out.predictions.assign(ev.fusion.size(), {});
  const eval::DistanceLabeler labeler = config.labeler();
  for (int trial = 0; trial < config.fusion_trials; ++trial) {
    Rng rng(derive_seed(scenario.seed, kLabelStream, static_cast<std::uint64_t>(trial)));
    std::vector<eval::NodeLabel> labels;
    for (int n = 0; n < m; ++n) {
      const double d = acoustics::distance(scenario.nodes[n],
                                           scenario.sources[out.dominant[n]].position);
      labels.push_back(labeler.label(out.node_truth[n], d, rng));
    }
    for (std::size_t e = 0; e < ev.fusion.size(); ++e) {
      const auto preds =
          eval::fuse_node_labels(labels, out.clusters, mus[e], ev.fusion[e].mode);
      for (std::size_t x = 0; x < preds.size(); ++x) {
        out.predictions[e].predicted.push_back(preds[x].label);
        out.predictions[e].truth.push_back(cluster_truth[x]);
      }
    }
  }
  for (std::size_t e = 0; e < ev.fusion.size(); ++e) {
    const eval::ScenarioPredictions* p = &out.predictions[e];
    ev.fusion[e].score = eval::score_fusion(std::span(p, 1));
  }
  return out;
}

std::vector<eval::FusionEntry> aggregate_fusion(
    const std::vector<const ScenarioOutcome*>& outcomes) {
  std::vector<const ScenarioOutcome*> split;
  for (const ScenarioOutcome* o : outcomes) {
    if (o->clusters.size() == 2) split.push_back(o);
  }
  if (split.empty()) return {};
  std::vector<eval::FusionEntry> out = split.front()->eval.fusion;
  for (std::size_t e = 0; e < out.size(); ++e) {
    std::vector<eval::ScenarioPredictions> per;
    for (const ScenarioOutcome* o : split) per.push_back(o->predictions.at(e));
    out[e].score = eval::score_fusion(per);
  }
  return out;
}

}  // namespace asncfl::pipeline
