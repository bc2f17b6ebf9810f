#include <doctest.h>

#include "asncfl/errors.hpp"
#include "asncfl/eval.hpp"

using namespace asncfl;
using namespace asncfl::eval;

TEST_CASE("weighted centroid") {
  const std::vector<Vec3> pos{{0, 0, 0}, {2, 0, 0}, {0, 4, 0}};
  const std::vector<double> w{1, 1, 0};
  const auto c = mv_weighted_centroid(pos, w);
  CHECK(c.x == doctest::Approx(1.0));
  CHECK(c.y == doctest::Approx(0.0));
  const std::vector<double> u{1, 1, 2};
  const auto d = mv_weighted_centroid(pos, u);
  CHECK(d.x == doctest::Approx(0.5));
  CHECK(d.y == doctest::Approx(2.0));
  const std::vector<Vec3> two{{0, 0, 0}, {4, 0, 0}};
  const std::vector<double> w13{1, 3};
  CHECK(mv_weighted_centroid(two, w13).x == doctest::Approx(3.0));
  const std::vector<double> z{0, 0, 0};
  CHECK_THROWS_AS(mv_weighted_centroid(pos, z), InvalidArgument);
}

TEST_CASE("normalized cluster distance") {
  const Vec3 s1{0, 0, 0}, s2{4, 0, 0};
  CHECK(normalized_cluster_distance({1, 0, 0}, s1, s1, s2) == doctest::Approx(0.25));
  CHECK(normalized_cluster_distance({1, 0, 0}, s2, s1, s2) == doctest::Approx(0.75));
  CHECK_THROWS_AS(normalized_cluster_distance({1, 0, 0}, s1, s1, s1), InvalidArgument);
}

TEST_CASE("assignment accuracy") {
  const std::vector<int> truth{0, 0, 1, 1};
  CHECK(assignment_accuracy({{0, 1}, {2, 3}}, truth) == 1.0);
  CHECK(assignment_accuracy({{2, 3}, {0, 1}}, truth) == 1.0);
  CHECK(assignment_accuracy({{0, 2}, {1, 3}}, truth) == 0.5);
  CHECK(assignment_accuracy({{0, 1, 2}, {3}}, truth) == 0.75);
  CHECK(assignment_accuracy_or_chance({{0, 1, 2, 3}}, truth) == 0.5);
  CHECK_THROWS_AS(assignment_accuracy({{0, 1, 2, 3}}, truth), InvalidArgument);
  CHECK(match_clusters_to_sources({{2, 3}, {0, 1}}, truth) == std::vector<int>{1, 0});
  CHECK(match_clusters_to_sources({{0, 2}, {1, 3}}, truth) == std::vector<int>{0, 1});
}

TEST_CASE("mode label") {
  CHECK(mode_label(std::vector<int>{1, 1, 0}) == 1);
  CHECK(mode_label(std::vector<int>{1, 0}) == 0);
  CHECK(mode_label(std::vector<int>{0}) == 0);
}

TEST_CASE("label fusion") {
  const std::vector<NodeLabel> labels{{1, 1}, {0, 1}, {0, 1}, {1, 1}};
  const std::vector<cfl::Cluster> clusters{{0, 1, 2}, {3}};
  SUBCASE("plain mode") {
    const std::vector<double> mu(4, 1.0);
    const auto p = fuse_node_labels(labels, clusters, mu, FusionMode::plain_mode);
    CHECK(p[0].label == 0);
    CHECK(p[1].label == 1);
  }
  SUBCASE("mv weighted") {
    const std::vector<double> mu{1.0, 0.2, 0.3, 1.0};
    const auto p = fuse_node_labels(labels, clusters, mu, FusionMode::mv_weighted);
    CHECK(p[0].label == 1);
    CHECK(!p[0].fell_back);
  }
  SUBCASE("weights can overrule the majority") {
    const std::vector<NodeLabel> l3{{1, 1}, {1, 1}, {0, 1}};
    const std::vector<cfl::Cluster> one{{0, 1, 2}};
    const std::vector<double> mu{0.1, 0.1, 1.0};
    CHECK(fuse_node_labels(l3, one, mu, FusionMode::mv_weighted)[0].label == 0);
    CHECK(fuse_node_labels(l3, one, mu, FusionMode::plain_mode)[0].label == 1);
  }
  SUBCASE("exact half goes to class one") {
    const std::vector<double> mu{0.5, 0.25, 0.25, 1.0};
    CHECK(fuse_node_labels(labels, clusters, mu, FusionMode::mv_weighted)[0].label == 1);
  }
  SUBCASE("all zero weights fall back to plain mode") {
    const std::vector<double> mu{0.0, 0.0, 0.0, 1.0};
    const auto p = fuse_node_labels(labels, clusters, mu, FusionMode::mv_weighted);
    CHECK(p[0].label == 0);
    CHECK(p[0].fell_back);
    CHECK(!p[1].fell_back);
  }
}

TEST_CASE("fusion scoring") {
  const std::vector<ScenarioPredictions> s{{{1, 0}, {1, 0}}, {{1, 1}, {0, 1}}};
  const auto sc = score_fusion(s);
  CHECK(sc.accuracy == doctest::Approx(0.75));
  // second scenario: TP 1, FP 1, FN 0
  CHECK(sc.f1 == doctest::Approx((1.0 + 2.0 / 3.0) / 2.0));
  const std::vector<ScenarioPredictions> none{{{0, 0}, {0, 0}}};
  CHECK(score_fusion(none).f1 == 1.0);
  CHECK_THROWS_AS(score_fusion({}), InvalidArgument);
}

TEST_CASE("distance labeler") {
  const DistanceLabeler lab;
  CHECK(lab.error_probability(0.0) == 0.0);
  CHECK(lab.error_probability(1.0) == doctest::Approx(0.225));
  CHECK(lab.error_probability(100.0) < 0.45);
  Rng rng(3);
  const auto near = lab.label(1, 0.0, rng);
  CHECK(near.label == 1);
  CHECK(near.confidence == 1.0);
  Rng a(9), b(9);
  const auto x = lab.label(0, 2.0, a), y = lab.label(0, 2.0, b);
  CHECK(x.label == y.label);
  CHECK(x.confidence == y.confidence);
  int wrong = 0;
  for (int t = 0; t < 2000; ++t) wrong += lab.label(0, 3.0, rng).label;
  CHECK(wrong > 0);
  CHECK(wrong < 1000);
}
