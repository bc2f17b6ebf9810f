#include <doctest.h>

#include <cmath>

#include "asncfl/errors.hpp"
#include "asncfl/rng.hpp"
#include "asncfl/vecspace.hpp"

using namespace asncfl;

namespace {
ParamVector pv(std::vector<double> v) { return ParamVector(std::move(v)); }
}  // namespace

TEST_CASE("ParamVector rejects empty and non-finite input") {
  CHECK_THROWS_AS(ParamVector({}), InvalidArgument);
  CHECK_THROWS_AS(pv({1.0, NAN}), InvalidArgument);
  CHECK_THROWS_AS(pv({INFINITY}), InvalidArgument);
}

TEST_CASE("cosine similarity of simple pairs") {
  CHECK(cosine_similarity(pv({1, 0}), pv({1, 0})) == doctest::Approx(1.0));
  CHECK(cosine_similarity(pv({1, 0}), pv({0, 1})) == doctest::Approx(0.0));
  CHECK(cosine_similarity(pv({1, 1}), pv({-2, -2})) == doctest::Approx(-1.0));
  CHECK_THROWS_AS(cosine_similarity(pv({0, 0}), pv({1, 0})), DegenerateVectorError);
  CHECK_THROWS_AS(cosine_similarity(pv({1, 0}), pv({1, 0, 0})), ShapeError);
}

TEST_CASE("cosine similarity is bounded and scale invariant") {
  Rng rng(11);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> a(17), b(17);
    for (auto& x : a) x = rng.normal();
    for (auto& x : b) x = rng.normal();
    const double s = cosine_similarity(pv(a), pv(b));
    CHECK(std::abs(s) <= 1.0 + 1e-12);
    const double alpha = rng.uniform(0.01, 100.0);
    CHECK(std::abs(cosine_similarity(pv(a), alpha * pv(a)) - 1.0) <= 1e-12);
  }
}

TEST_CASE("similarity matrix examples") {
  SUBCASE("one client") {
    const std::vector<ParamVector> u{pv({3, 4})};
    const std::vector<int> ids{7};
    const auto a = similarity_matrix(u, ids);
    CHECK(a.size() == 1);
    CHECK(a.at(0, 0) == 1.0);
  }
  SUBCASE("antiparallel pair") {
    const std::vector<ParamVector> u{pv({1, 2}), pv({-1, -2})};
    const std::vector<int> ids{0, 1};
    const auto a = similarity_matrix(u, ids);
    CHECK(a.at(0, 1) == doctest::Approx(-1.0));
    CHECK(a.at(1, 0) == doctest::Approx(-1.0));
  }
  SUBCASE("three updates") {
    const std::vector<ParamVector> u{pv({1, 0}), pv({0, 1}), pv({1, 1})};
    const std::vector<int> ids{0, 1, 2};
    const auto a = similarity_matrix(u, ids);
    CHECK(a.at(0, 1) == doctest::Approx(0.0));
    CHECK(a.at(0, 2) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
    CHECK(a.at(1, 2) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
  }
}

TEST_CASE("similarity matrix is exactly symmetric with unit diagonal") {
  Rng rng(5);
  std::vector<ParamVector> u;
  std::vector<int> ids;
  for (int i = 0; i < 9; ++i) {
    std::vector<double> v(31);
    for (auto& x : v) x = rng.normal();
    u.push_back(pv(v));
    ids.push_back(100 - i);
  }
  const auto a = similarity_matrix(u, ids);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.at(i, i) == 1.0);
    for (std::size_t j = 0; j < a.size(); ++j) CHECK(a.at(i, j) == a.at(j, i));
  }
  CHECK(a.index_of(96) == 4);
}

TEST_CASE("similarity matrix names the client with a zero update") {
  const std::vector<ParamVector> u{pv({1, 0}), pv({0, 0})};
  const std::vector<int> ids{3, 8};
  try {
    similarity_matrix(u, ids);
    FAIL("expected DegenerateVectorError");
  } catch (const DegenerateVectorError& e) {
    CHECK(e.client_id() == 8);
  }
  const std::vector<int> dup{1, 1};
  const std::vector<ParamVector> ok{pv({1, 0}), pv({0, 1})};
  CHECK_THROWS_AS(similarity_matrix(ok, dup), InvalidArgument);
}
