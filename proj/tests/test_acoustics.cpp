#include <doctest.h>

#include <cmath>

#include "asncfl/acoustics.hpp"
#include "asncfl/errors.hpp"

using namespace asncfl;
using namespace asncfl::acoustics;

TEST_CASE("critical distance of the reference room") {
  CHECK(critical_distance(Room{}, 0.34) == doctest::Approx(0.6054).epsilon(1e-3));
  CHECK_THROWS_AS(critical_distance(Room{}, 0.0), InvalidArgument);
}

TEST_CASE("generated scenarios satisfy every constraint") {
  const ScenarioParams params;
  const double rc = critical_distance(params.room, params.t60);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto s = generate_scenario(seed, params);
    CHECK_NOTHROW(validate_scenario(s));
    REQUIRE(s.sources.size() == 2);
    CHECK(s.nodes.size() == 16);
    CHECK(s.sources[0].kind != s.sources[1].kind);
    for (int z = 0; z < 2; ++z) {
      int inside = 0;
      for (const auto& n : s.nodes) {
        CHECK(s.room.contains_strictly(n));
        if (distance(n, s.sources[z].position) <= rc) ++inside;
      }
      CHECK(inside >= 3);
    }
  }
}

TEST_CASE("scenario generation is deterministic") {
  const auto a = generate_scenario(42, {});
  const auto b = generate_scenario(42, {});
  CHECK(a.nodes == b.nodes);
  CHECK(a.rir_seeds == b.rir_seeds);
  CHECK(!(generate_scenario(43, {}).nodes == a.nodes));
}

TEST_CASE("validate_scenario rejects broken layouts") {
  auto s = generate_scenario(7, {});
  s.nodes[0] = Vec3{-1.0, 1.0, 1.0};
  CHECK_THROWS_AS(validate_scenario(s), ConstraintError);
  s = generate_scenario(7, {});
  s.sources[1].position = s.sources[0].position;
  CHECK_THROWS_AS(validate_scenario(s), ConstraintError);
}

TEST_CASE("direct-to-reverberant ratio is one at the critical distance") {
  const double rc = critical_distance(Room{}, 0.34);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto rir = synth_rir_for_distance(rc, rc, 0.34, seed);
    const std::size_t d = static_cast<std::size_t>(std::lround(rir.first_peak_delay * 16000));
    double direct = 0.0, tail = 0.0;
    for (std::size_t i = 0; i < rir.taps.size(); ++i) {
      (i == d ? direct : tail) += rir.taps[i] * rir.taps[i];
    }
    CHECK(10 * std::log10(direct / tail) == doctest::Approx(0.0).epsilon(1e-6));
  }
  const auto near = synth_rir_for_distance(0.2, rc, 0.34, 1);
  CHECK(near.first_peak_delay == doctest::Approx(0.2 / kSpeedOfSound));
}

TEST_CASE("dominant source is the nearer one") {
  auto s = generate_scenario(3, {});
  for (int m = 0; m < static_cast<int>(s.nodes.size()); ++m) {
    const double d0 = distance(s.nodes[m], s.sources[0].position);
    const double d1 = distance(s.nodes[m], s.sources[1].position);
    if (d0 != d1) CHECK(dominant_source(s, m) == (d0 < d1 ? 0 : 1));
  }
}

TEST_CASE("rendering mixes both sources") {
  const auto s = generate_scenario(9, {});
  const auto a = synth_source_signal(0, 1, 1.0);
  const auto b = synth_source_signal(1, 2, 1.0);
  CHECK(a.samples.size() == 16000);
  double rms = 0.0;
  for (double x : a.samples) rms += x * x;
  CHECK(std::sqrt(rms / a.samples.size()) == doctest::Approx(1.0).epsilon(1e-9));
  const auto x = render_node_signal(s, a, b, 0);
  CHECK(x.samples.size() == a.samples.size());
  const auto all = render_all_nodes(s, a, b);
  REQUIRE(all.size() == s.nodes.size());
  for (std::size_t i = 0; i < x.samples.size(); ++i) {
    CHECK(all[0].samples[i] == doctest::Approx(x.samples[i]).epsilon(1e-9));
  }
}
