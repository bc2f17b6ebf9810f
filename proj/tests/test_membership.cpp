#include <doctest.h>

#include "asncfl/errors.hpp"
#include "asncfl/membership.hpp"

using namespace asncfl;
using namespace asncfl::membership;

namespace {

SimilarityMatrix fixture(double scale = 1.0) {
  const double a01 = 0.9, a02 = 0.5, a12 = 0.6;
  const double x[3] = {0.1, 0.2, 0.8};
  std::vector<double> e{1.0, a01, a02, x[0],
                        a01, 1.0, a12, x[1],
                        a02, a12, 1.0, x[2],
                        x[0], x[1], x[2], 1.0};
  for (std::size_t i = 0; i < 16; ++i) {
    if (i % 5 != 0) e[i] *= scale;
  }
  return SimilarityMatrix({0, 1, 2, 3}, e);
}

}  // namespace

TEST_CASE("mean similarities") {
  const auto m = mean_similarities(fixture(), {0, 1, 2}, {3});
  CHECK(m.q[0] == doctest::Approx(0.7));
  CHECK(m.q[1] == doctest::Approx(0.75));
  CHECK(m.q[2] == doctest::Approx(0.55));
  CHECK(!m.q_defined[3]);
  CHECK(m.r[0] == doctest::Approx(0.1));
  CHECK(m.r[3] == doctest::Approx((0.1 + 0.2 + 0.8) / 3));
  CHECK_THROWS_AS(mean_similarities(fixture(), {0, 1}, {3}), InvalidArgument);
  CHECK_THROWS_AS(mean_similarities(fixture(), {0, 1, 2}, {2, 3}), InvalidArgument);
}

TEST_CASE("min-max normalization") {
  std::vector<double> v{2, 4, 3};
  minmax_normalize(v, 0.5);
  CHECK(v == std::vector<double>{0, 1, 0.5});
  std::vector<double> c{7, 7};
  minmax_normalize(c, 0.5);
  CHECK(c == std::vector<double>{0.5, 0.5});
}

TEST_CASE("membership values of the reference fixture") {
  const auto r = membership_values(fixture(), {0, 1, 2}, {3}, 0.5);
  CHECK(r.reference[0] == 0);
  CHECK(r.reference[1] == 3);
  CHECK(r.p[0] == doctest::Approx(0.375));
  CHECK(r.p[1] == doctest::Approx(0.5 + 0.5 / 7));
  CHECK(r.p[2] == doctest::Approx(0.5));
  CHECK(r.mu_of(0) == doctest::Approx(1.0));
  CHECK(r.mu_of(1) == doctest::Approx(0.8));
  CHECK(r.mu_of(2) == doctest::Approx(0.0));
  CHECK(r.mu_of(3) == 1.0);
}

TEST_CASE("lambda moves the reference node") {
  // q only
  const auto r = membership_values(fixture(), {0, 1, 2}, {3}, 1.0);
  CHECK(r.reference[0] == 2);
  const auto r0 = membership_values(fixture(), {0, 1, 2}, {3}, 0.0);
  CHECK(r0.reference[0] == 0);
  CHECK_THROWS_AS(membership_values(fixture(), {0, 1, 2}, {3}, 1.5), InvalidArgument);
}

TEST_CASE("scaling the off-diagonal keeps the reference and the mu order") {
  const auto a = membership_values(fixture(), {0, 1, 2}, {3}, 0.5);
  const auto b = membership_values(fixture(0.5), {0, 1, 2}, {3}, 0.5);
  CHECK(a.reference[0] == b.reference[0]);
  CHECK(b.mu_of(0) == 1.0);
  CHECK(b.mu_of(1) > b.mu_of(2));
  CHECK(b.mu_of(1) == doctest::Approx((0.45 - 0.25) / 0.75));
}

TEST_CASE("thresholding") {
  const auto base = membership_values(fixture(), {0, 1, 2}, {3}, 0.5);
  const auto t0 = threshold_mvs(base, 0.0);
  CHECK(t0.mu_of(1) == doctest::Approx(0.8));
  CHECK(t0.zeroed == std::vector<int>{2});
  const auto t5 = threshold_mvs(base, 0.5);
  CHECK(t5.mu_of(1) == doctest::Approx(0.8));
  const auto t9 = threshold_mvs(base, 0.9);
  CHECK(t9.mu_of(1) == 0.0);
  CHECK(t9.mu_of(0) == 1.0);
  CHECK(t9.mu_of(3) == 1.0);
  CHECK(t9.v == 0.9);
  CHECK_THROWS_AS(threshold_mvs(base, 1.1), InvalidArgument);
}
