#include "asncfl/membership.hpp"

#include <algorithm>
#include <string>

#include "asncfl/errors.hpp"

namespace asncfl::membership {

namespace {

// Row indices of a cluster's members, ascending by client id.
std::vector<std::size_t> rows_of(const SimilarityMatrix& a, const cfl::Cluster& c) {
  cfl::Cluster sorted = c;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::size_t> rows;
  for (int id : sorted) rows.push_back(a.index_of(id));
  return rows;
}

void check_partition(const SimilarityMatrix& a, const cfl::Cluster& c1,
                     const cfl::Cluster& c2) {
  if (c1.empty() || c2.empty()) throw InvalidArgument("both clusters must be non-empty");
  std::vector<int> all(c1);
  all.insert(all.end(), c2.begin(), c2.end());
  std::sort(all.begin(), all.end());
  std::vector<int> ids = a.client_ids();
  std::sort(ids.begin(), ids.end());
  if (all != ids) {
    throw InvalidArgument("clusters do not partition the similarity matrix clients");
  }
}

}  // namespace

MeanSimilarities mean_similarities(const SimilarityMatrix& a,
                                   const cfl::Cluster& c1,
                                   const cfl::Cluster& c2) {
  check_partition(a, c1, c2);
  MeanSimilarities out;
  out.q.assign(a.size(), 0.0);
  out.r.assign(a.size(), 0.0);
  out.q_defined.assign(a.size(), false);
  const auto rows1 = rows_of(a, c1);
  const auto rows2 = rows_of(a, c2);
  for (int x = 0; x < 2; ++x) {
    const auto& own = x == 0 ? rows1 : rows2;
    const auto& other = x == 0 ? rows2 : rows1;
    for (std::size_t i : own) {
      if (own.size() > 1) {
        double acc = 0.0;
        for (std::size_t j : own) {
          if (j != i) acc += a.at(i, j);
        }
        out.q[i] = acc / static_cast<double>(own.size() - 1);
        out.q_defined[i] = true;
      }
      double acc = 0.0;
      for (std::size_t k : other) acc += a.at(i, k);
      out.r[i] = acc / static_cast<double>(other.size());
    }
  }
  return out;
}

void minmax_normalize(std::vector<double>& v, double constant_value) {
  if (v.empty()) return;
  const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
  const double lo = *lo_it, hi = *hi_it;
  if (hi == lo) {
    std::fill(v.begin(), v.end(), constant_value);
    return;
  }
  for (double& x : v) x = (x - lo) / (hi - lo);
}

std::vector<double> fused_scores(std::span<const double> q,
                                 std::span<const double> r, double lambda) {
  if (q.size() != r.size()) throw ShapeError("q and r differ in length");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw InvalidArgument("lambda must be in [0, 1]");
  std::vector<double> qn(q.begin(), q.end());
  std::vector<double> rn(r.begin(), r.end());
  minmax_normalize(qn, 0.5);
  minmax_normalize(rn, 0.5);
  std::vector<double> p(q.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = lambda * qn[i] + (1.0 - lambda) * rn[i];
  }
  return p;
}

double MembershipReport::mu_of(int node_id) const {
  for (std::size_t i = 0; i < node_ids.size(); ++i) {
    if (node_ids[i] == node_id) return mu[i];
  }
  throw InvalidArgument("node " + std::to_string(node_id) + " not in membership report");
}

MembershipReport membership_values(const SimilarityMatrix& a,
                                   const cfl::Cluster& c1,
                                   const cfl::Cluster& c2, double lambda) {
  const MeanSimilarities ms = mean_similarities(a, c1, c2);
  MembershipReport rep;
  rep.lambda = lambda;
  rep.node_ids = a.client_ids();
  const std::size_t n = a.size();
  rep.cluster_of.assign(n, 0);
  rep.q_norm.assign(n, 0.5);
  rep.r_norm.assign(n, 0.5);
  rep.p.assign(n, 0.0);
  rep.raw_mu.assign(n, 1.0);
  rep.mu.assign(n, 1.0);

  for (int x = 0; x < 2; ++x) {
    const auto rows = rows_of(a, x == 0 ? c1 : c2);
    for (std::size_t i : rows) rep.cluster_of[i] = x;
    if (rows.size() == 1) {
      rep.reference[x] = a.client_ids()[rows[0]];
      continue;
    }
    std::vector<double> q, r;
    for (std::size_t i : rows) {
      q.push_back(ms.q[i]);
      r.push_back(ms.r[i]);
    }
    const std::vector<double> p = fused_scores(q, r, lambda);
    minmax_normalize(q, 0.5);
    minmax_normalize(r, 0.5);
    // rows are ascending by id, so the first minimum is the lowest id.
    std::size_t ref = 0;
    for (std::size_t k = 1; k < rows.size(); ++k) {
      if (p[k] < p[ref]) ref = k;
    }
    rep.reference[x] = a.client_ids()[rows[ref]];
    std::vector<double> mu;
    for (std::size_t k = 0; k < rows.size(); ++k) {
      rep.q_norm[rows[k]] = q[k];
      rep.r_norm[rows[k]] = r[k];
      rep.p[rows[k]] = p[k];
      rep.raw_mu[rows[k]] = a.at(rows[k], rows[ref]);
      mu.push_back(rep.raw_mu[rows[k]]);
    }
    minmax_normalize(mu, 1.0);
    for (std::size_t k = 0; k < rows.size(); ++k) rep.mu[rows[k]] = mu[k];
  }
  return rep;
}

MembershipReport threshold_mvs(MembershipReport report, double v) {
  if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument("threshold v must be in [0, 1]");
  report.v = v;
  report.zeroed.clear();
  for (std::size_t i = 0; i < report.mu.size(); ++i) {
    if (report.mu[i] <= v) {
      report.mu[i] = 0.0;
      report.zeroed.push_back(report.node_ids[i]);
    }
  }
  std::sort(report.zeroed.begin(), report.zeroed.end());
  return report;
}

}  // namespace asncfl::membership
