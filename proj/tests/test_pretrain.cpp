#include <doctest.h>

#include "asncfl/config.hpp"
#include "asncfl/pipeline.hpp"
#include "asncfl/rng.hpp"

using namespace asncfl;

TEST_CASE("pretraining trace on 64 synthetic segments") {
  RunConfig c;
  c.pretrain_segments = 64;
  const auto corpus = pipeline::pretraining_corpus(c);
  REQUIRE(corpus.size() == 64);
  auto model = nn::build_autoencoder(derive_seed(c.seed, 0x30DE));
  const auto trace = nn::pretrain(model, corpus, 30, c.pretrain_lr);
  REQUIRE(trace.size() == 30);
  // recorded trace endpoints
  CHECK(trace.front() == doctest::Approx(0.02448034826693353).epsilon(1e-9));
  CHECK(trace.back() == doctest::Approx(0.0077441964572753565).epsilon(1e-9));
  CHECK(trace.back() < 0.5 * trace.front());
  for (std::size_t e = 1; e < trace.size(); ++e) CHECK(trace[e] < 1.1 * trace[e - 1]);
}
