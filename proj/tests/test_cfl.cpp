#include <doctest.h>

#include <algorithm>

#include "asncfl/cfl.hpp"
#include "asncfl/errors.hpp"
#include "asncfl/rng.hpp"

using namespace asncfl;
using namespace asncfl::cfl;

namespace {

ParamVector pv(std::vector<double> v) { return ParamVector(std::move(v)); }

SimilarityMatrix random_matrix(int m, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<ParamVector> u;
  std::vector<int> ids;
  for (int i = 0; i < m; ++i) {
    std::vector<double> v(6);
    for (auto& x : v) x = rng.normal();
    u.push_back(pv(v));
    ids.push_back(i);
  }
  return similarity_matrix(u, ids);
}

std::vector<nn::FeatureSegment> segments(int n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<nn::FeatureSegment> out;
  for (int i = 0; i < n; ++i) {
    Matrix m(nn::kInputSize, nn::kInputSize);
    for (auto& x : m.data) x = rng.uniform();
    out.push_back({m, -1, i});
  }
  return out;
}

}  // namespace

TEST_CASE("cluster aggregation") {
  const auto theta = ParamVector::zeros(2);
  SUBCASE("equal weights") {
    const std::vector<WeightedDelta> d{{0, pv({2, 0}), 1}, {1, pv({4, 2}), 1}};
    const auto out = cluster_aggregate(theta, d);
    CHECK(out[0] == doctest::Approx(3.0));
    CHECK(out[1] == doctest::Approx(1.0));
  }
  SUBCASE("weighted by data size") {
    const std::vector<WeightedDelta> d{{0, pv({2, 0}), 1}, {1, pv({4, 2}), 3}};
    const auto out = cluster_aggregate(theta, d);
    CHECK(out[0] == doctest::Approx(3.5));
    CHECK(out[1] == doctest::Approx(1.5));
  }
  SUBCASE("order does not matter") {
    const std::vector<WeightedDelta> a{{0, pv({0.1, 0.7}), 2}, {5, pv({1e-3, 3}), 7},
                                       {2, pv({-4, 1}), 1}};
    std::vector<WeightedDelta> b{a[2], a[0], a[1]};
    CHECK(cluster_aggregate(theta, a) == cluster_aggregate(theta, b));
  }
  SUBCASE("rejects empty input") {
    CHECK_THROWS_AS(cluster_aggregate(theta, {}), InvalidArgument);
  }
}

TEST_CASE("congruence statistics") {
  const std::vector<ParamVector> opposed{pv({3, 4}), pv({-3, -4})};
  auto s = congruence_stats(opposed, std::nullopt);
  CHECK(s.mean_norm == doctest::Approx(0.0));
  CHECK(s.max_norm == doctest::Approx(5.0));
  CHECK(!s.grad);

  const std::vector<ParamVector> same{pv({0.003, 0.004}), pv({0.003, 0.004})};
  s = congruence_stats(same, 0.0055);
  CHECK(s.mean_norm == doctest::Approx(0.005));
  CHECK(s.max_norm == doctest::Approx(0.005));
  CHECK(*s.grad == doctest::Approx(0.0005));
}

TEST_CASE("split criterion") {
  const Thresholds t;
  CongruenceStats s{0.01, 0.02, 0.0001};
  CHECK(should_split(s, t));
  s.grad.reset();
  CHECK(!should_split(s, t));
  CHECK(!should_split({0.02, 0.03, 0.0001}, t));   // mean too large
  CHECK(!should_split({0.001, 0.004, 0.0001}, t));  // max too small
  CHECK(!should_split({0.01, 0.02, 0.001}, t));     // still moving
  CHECK(should_split({0.0134, 0.005, 0.0007}, t));  // bounds inclusive
}

TEST_CASE("bipartition of a block matrix") {
  // two tight groups {0, 2, 4} and {1, 3}
  const std::vector<ParamVector> u{pv({1, 0.1}), pv({0, 1}), pv({1, 0.05}),
                                   pv({0.1, 1}), pv({1, 0})};
  const std::vector<int> ids{0, 1, 2, 3, 4};
  const auto a = similarity_matrix(u, ids);
  const auto bp = bipartition(a);
  CHECK(bp.c1 == Cluster{0, 2, 4});
  CHECK(bp.c2 == Cluster{1, 3});
  CHECK(bp.max_cross == doctest::Approx(max_cross_similarity(a, bp.c1, bp.c2)));
}

TEST_CASE("single linkage matches exhaustive search") {
  for (int m = 2; m <= 12; ++m) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto a = random_matrix(m, 1000 * m + seed);
      const auto fast = bipartition(a);
      const auto slow = brute_force_bipartition(a);
      CHECK(fast.max_cross == doctest::Approx(slow.max_cross).epsilon(1e-12));
      CHECK(fast.c1.size() + fast.c2.size() == static_cast<std::size_t>(m));
      CHECK(std::find(fast.c1.begin(), fast.c1.end(), 0) != fast.c1.end());
    }
  }
}

TEST_CASE("unsupervised loop") {
  auto model = nn::build_autoencoder(17);
  model.freeze_except_bottleneck();
  std::vector<ClientData> clients;
  for (int i = 0; i < 4; ++i) clients.push_back({i, segments(1, 300 + i)});
  CflConfig cfg;
  cfg.max_rounds = 3;
  cfg.seed = 5;

  const auto r1 = run_unsupervised_cfl(clients, model, cfg);
  CHECK(r1.log.rounds.size() == 3);
  CHECK(r1.clusters.size() == r1.thetas.size());
  CHECK(!r1.log.rounds[0].clusters[0].stats.grad);
  CHECK(!r1.log.rounds[0].clusters[0].split);

  cfg.workers = 2;
  const auto r2 = run_unsupervised_cfl(clients, model, cfg);
  CHECK(r1.clusters == r2.clusters);
  REQUIRE(r1.thetas.size() == r2.thetas.size());
  for (std::size_t k = 0; k < r1.thetas.size(); ++k) CHECK(r1.thetas[k] == r2.thetas[k]);
  CHECK(r1.log.rounds[2].clusters[0].stats.mean_norm ==
        r2.log.rounds[2].clusters[0].stats.mean_norm);
}

TEST_CASE("a loop with forced thresholds splits once in round two") {
  auto model = nn::build_autoencoder(18);
  model.freeze_except_bottleneck();
  std::vector<ClientData> clients;
  for (int i = 0; i < 4; ++i) clients.push_back({i, segments(1, 500 + i)});
  CflConfig cfg;
  cfg.max_rounds = 4;
  cfg.thresholds = {1e9, 0.0, 1e9};
  const auto r = run_unsupervised_cfl(clients, model, cfg);
  REQUIRE(r.log.splits.size() == 1);
  CHECK(!r.log.no_split);
  CHECK(r.log.splits[0].round == 2);
  CHECK(r.clusters.size() == 2);
  Cluster all = r.clusters[0];
  all.insert(all.end(), r.clusters[1].begin(), r.clusters[1].end());
  std::sort(all.begin(), all.end());
  CHECK(all == Cluster{0, 1, 2, 3});
}
