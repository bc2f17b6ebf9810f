#include "asncfl/cfl.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <thread>

#include "asncfl/errors.hpp"

namespace asncfl::cfl {

namespace {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent_[std::max(a, b)] = std::min(a, b);
    return true;
  }

 private:
  std::vector<std::size_t> parent_;
};

std::size_t lowest_id_index(const SimilarityMatrix& a) {
  const auto& ids = a.client_ids();
  return static_cast<std::size_t>(std::min_element(ids.begin(), ids.end()) -
                                  ids.begin());
}

Bipartition make_bipartition(const SimilarityMatrix& a,
                             const std::vector<bool>& in_first) {
  Bipartition bp;
  for (std::size_t i = 0; i < a.size(); ++i) {
    (in_first[i] ? bp.c1 : bp.c2).push_back(a.client_ids()[i]);
  }
  std::sort(bp.c1.begin(), bp.c1.end());
  std::sort(bp.c2.begin(), bp.c2.end());
  bp.max_cross = max_cross_similarity(a, bp.c1, bp.c2);
  return bp;
}

std::vector<ParamVector> update_clients(
    const nn::AutoencoderModel& model, const ParamVector& theta,
    const Cluster& members, const std::map<int, const ClientData*>& by_id,
    const std::map<int, std::vector<nn::FrozenPrefix>>& prefixes, double lr,
    int workers) {
  std::vector<std::optional<ParamVector>> out(members.size());
  auto run_range = [&](std::size_t begin, std::size_t step) {
    nn::AutoencoderModel local = model;
    for (std::size_t k = begin; k < members.size(); k += step) {
      const ClientData& client = *by_id.at(members[k]);
      if (client.segments.empty()) {
        throw InvalidArgument("client " + std::to_string(client.id) + " has no data");
      }
      local.set_masked(theta);
      out[k] = nn::sgd_epoch(local, client.segments, prefixes.at(client.id), lr);
    }
  };
  const std::size_t n_workers =
      std::clamp<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), 1,
                              members.size());
  if (n_workers == 1) {
    run_range(0, 1);
  } else {
    std::vector<std::exception_ptr> errors(n_workers);
    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < n_workers; ++w) {
      threads.emplace_back([&, w] {
        try {
          run_range(w, n_workers);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : threads) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  std::vector<ParamVector> deltas;
  deltas.reserve(out.size());
  for (auto& d : out) deltas.push_back(std::move(*d));
  return deltas;
}

std::vector<WeightedDelta> weighted(const Cluster& members,
                                    const std::vector<ParamVector>& deltas,
                                    const Cluster& subset,
                                    const std::map<int, const ClientData*>& by_id) {
  std::vector<WeightedDelta> out;
  for (std::size_t k = 0; k < members.size(); ++k) {
    if (std::binary_search(subset.begin(), subset.end(), members[k])) {
      out.push_back({members[k], deltas[k], by_id.at(members[k])->segments.size()});
    }
  }
  return out;
}

}  // namespace

ParamVector client_update(nn::AutoencoderModel& model, const ParamVector& theta,
                          std::span<const nn::FeatureSegment> data, double lr) {
  model.set_masked(theta);
  return nn::sgd_epoch(model, data, lr, true);
}

ParamVector cluster_aggregate(const ParamVector& theta,
                              std::span<const WeightedDelta> deltas) {
  std::vector<std::size_t> order(deltas.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return deltas[a].client_id < deltas[b].client_id;
  });
  std::size_t total = 0;
  for (const auto& d : deltas) {
    if (d.delta.size() != theta.size()) {
      throw ShapeError("update of client " + std::to_string(d.client_id) +
                       " has length " + std::to_string(d.delta.size()) +
                       ", expected " + std::to_string(theta.size()));
    }
    total += d.data_size;
  }
  if (total == 0) throw InvalidArgument("aggregation over zero data");
  std::vector<double> out(theta.values().begin(), theta.values().end());
  for (std::size_t k : order) {
    const double w = static_cast<double>(deltas[k].data_size) / static_cast<double>(total);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += w * deltas[k].delta[i];
  }
  return ParamVector(std::move(out));
}

CongruenceStats congruence_stats(std::span<const ParamVector> deltas,
                                 std::optional<double> previous_mean_norm) {
  if (deltas.empty()) throw InvalidArgument("congruence stats need updates");
  std::vector<double> mean(deltas[0].size(), 0.0);
  CongruenceStats s;
  for (const ParamVector& d : deltas) {
    if (d.size() != mean.size()) throw ShapeError("updates differ in length");
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += d[i];
    s.max_norm = std::max(s.max_norm, norm(d));
  }
  const double inv = 1.0 / static_cast<double>(deltas.size());
  for (double& m : mean) m *= inv;
  // The mean norm cannot exceed the max norm; the min() only absorbs
  // rounding when all updates coincide.
  s.mean_norm = std::min(norm(ParamVector(std::move(mean))), s.max_norm);
  if (previous_mean_norm) s.grad = std::abs(s.mean_norm - *previous_mean_norm);
  return s;
}

bool should_split(const CongruenceStats& stats, const Thresholds& t) {
  if (!stats.grad) return false;
  return stats.mean_norm <= t.eps1 && stats.max_norm >= t.eps2 &&
         *stats.grad <= t.eps3;
}

double max_cross_similarity(const SimilarityMatrix& a, const Cluster& c1,
                            const Cluster& c2) {
  double best = -std::numeric_limits<double>::infinity();
  for (int i : c1) {
    const std::size_t ri = a.index_of(i);
    for (int k : c2) best = std::max(best, a.at(ri, a.index_of(k)));
  }
  return best;
}

Bipartition bipartition(const SimilarityMatrix& a) {
  const std::size_t n = a.size();
  if (n < 2) throw InvalidArgument("bipartition needs at least 2 clients");
  struct Edge {
    double w;
    std::size_t i, j;
  };
  std::vector<Edge> edges;
  edges.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) edges.push_back({a.at(i, j), i, j});
  }
  std::stable_sort(edges.begin(), edges.end(),
                   [](const Edge& x, const Edge& y) { return x.w > y.w; });
  DisjointSets sets(n);
  std::size_t components = n;
  for (const Edge& e : edges) {
    if (components == 2) break;
    if (sets.unite(e.i, e.j)) --components;
  }
  const std::size_t anchor = sets.find(lowest_id_index(a));
  std::vector<bool> in_first(n);
  for (std::size_t i = 0; i < n; ++i) in_first[i] = sets.find(i) == anchor;
  return make_bipartition(a, in_first);
}

Bipartition brute_force_bipartition(const SimilarityMatrix& a) {
  const std::size_t n = a.size();
  if (n < 2 || n > 20) {
    throw InvalidArgument("brute-force bipartition supports 2..20 clients");
  }
  const std::size_t anchor = lowest_id_index(a);
  std::vector<std::size_t> others;
  for (std::size_t i = 0; i < n; ++i) {
    if (i != anchor) others.push_back(i);
  }
  const std::uint32_t combos = 1u << others.size();
  std::optional<Bipartition> best;
  std::vector<bool> in_first(n);
  // mask bit k set -> others[k] joins the anchor; the all-set mask leaves c2
  // empty and is skipped.
  for (std::uint32_t mask = 0; mask + 1 < combos; ++mask) {
    std::fill(in_first.begin(), in_first.end(), false);
    in_first[anchor] = true;
    for (std::size_t k = 0; k < others.size(); ++k) {
      if (mask & (1u << k)) in_first[others[k]] = true;
    }
    double cross = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (!in_first[i]) continue;
      for (std::size_t j = 0; j < n; ++j) {
        if (!in_first[j]) cross = std::max(cross, a.at(i, j));
      }
    }
    if (best && cross > best->max_cross) continue;
    Bipartition cand = make_bipartition(a, in_first);
    if (!best || cand.max_cross < best->max_cross ||
        (cand.max_cross == best->max_cross && cand.c1 < best->c1)) {
      best = std::move(cand);
    }
  }
  return *best;
}

CflResult run_unsupervised_cfl(std::span<const ClientData> clients,
                               const nn::AutoencoderModel& model,
                               const CflConfig& config) {
  if (clients.empty()) throw InvalidArgument("CFL needs at least one client");
  if (config.max_rounds < 1) throw InvalidArgument("max_rounds must be >= 1");
  if (model.masked_count() == 0) {
    throw InvalidArgument("model has no trainable parameters");
  }
  std::map<int, const ClientData*> by_id;
  for (const ClientData& c : clients) {
    if (!by_id.emplace(c.id, &c).second) {
      throw InvalidArgument("duplicate client id " + std::to_string(c.id));
    }
  }

  nn::AutoencoderModel base = model;
  base.reinit_trainable(config.seed);
  // The layers below the trainable block never change during CFL, so their
  // outputs are computed once per segment.
  const int lowest = nn::lowest_trainable_layer(base);
  std::map<int, std::vector<nn::FrozenPrefix>> prefixes;
  for (const auto& [id, client] : by_id) {
    if (client->segments.empty()) {
      throw InvalidArgument("client " + std::to_string(id) + " has no data");
    }
    auto& list = prefixes[id];
    for (const auto& seg : client->segments) {
      list.push_back(nn::compute_prefix(base, seg.values, lowest));
    }
  }

  struct Active {
    Cluster members;
    ParamVector theta;
    std::optional<double> previous_mean_norm;
  };
  Cluster everyone;
  for (const auto& [id, _] : by_id) everyone.push_back(id);
  std::vector<Active> active{{everyone, base.extract_masked(), std::nullopt}};

  CflResult result;
  RoundLog& log = result.log;
  bool stop = false;
  for (int round = 1; round <= config.max_rounds && !stop; ++round) {
    RoundRecord record;
    record.round = round;
    std::vector<Active> next;
    for (Active& c : active) {
      std::vector<ParamVector> deltas =
          update_clients(base, c.theta, c.members, by_id, prefixes, config.lr,
                         config.workers);
      const CongruenceStats stats = congruence_stats(deltas, c.previous_mean_norm);
      const bool may_split =
          c.members.size() >= 2 && (config.recursive || log.splits.empty());
      if (may_split && should_split(stats, config.thresholds)) {
        SimilarityMatrix sim = similarity_matrix(deltas, c.members);
        const Bipartition bp = bipartition(sim);
        for (const Cluster* child : {&bp.c1, &bp.c2}) {
          const auto part = weighted(c.members, deltas, *child, by_id);
          next.push_back({*child, cluster_aggregate(c.theta, part), std::nullopt});
        }
        log.splits.push_back(
            {round, c.members, bp.c1, bp.c2, std::move(sim), std::move(deltas)});
        record.clusters.push_back({c.members, stats, true});
        if (!config.recursive) stop = true;
      } else {
        const auto part = weighted(c.members, deltas, c.members, by_id);
        next.push_back({c.members, cluster_aggregate(c.theta, part), stats.mean_norm});
        record.clusters.push_back({c.members, stats, false});
      }
    }
    log.rounds.push_back(std::move(record));
    active = std::move(next);
  }
  log.no_split = log.splits.empty();
  for (Active& c : active) {
    result.clusters.push_back(std::move(c.members));
    result.thetas.push_back(std::move(c.theta));
  }
  return result;
}

}  // namespace asncfl::cfl
