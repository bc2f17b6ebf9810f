#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "asncfl/checkpoint.hpp"
#include "asncfl/errors.hpp"
#include "asncfl/nn.hpp"
#include "asncfl/rng.hpp"

using namespace asncfl;
using namespace asncfl::nn;

namespace {

Matrix random_input(std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(kInputSize, kInputSize);
  for (auto& x : m.data) x = rng.uniform();
  return m;
}

std::vector<FeatureSegment> random_segments(int n, std::uint64_t seed) {
  std::vector<FeatureSegment> out;
  for (int i = 0; i < n; ++i) out.push_back({random_input(seed + i), 0, i});
  return out;
}

}  // namespace

TEST_CASE("parameter counts") {
  const auto model = build_autoencoder(3);
  CHECK(model.param_count() == 5999);
  const std::vector<std::size_t> per_layer{156, 0, 2416, 0, 870, 0, 2406, 0, 151};
  for (int l = 0; l < 9; ++l) {
    CHECK(model.layers()[l].param_count() == per_layer[l]);
  }
  auto frozen = model;
  frozen.freeze_except_bottleneck();
  CHECK(frozen.masked_count() == 841);
  CHECK(frozen.masked_indices().front() == frozen.layer_offset(kBottleneckLayer));
  CHECK(frozen.masked_indices().back() == frozen.layer_offset(kBottleneckLayer) + 840);
}

TEST_CASE("shape chain") {
  const auto& s = autoencoder_shapes();
  const std::vector<Shape3> expected{{6, 124, 124}, {6, 62, 62}, {16, 58, 58},
                                     {16, 29, 29},  {16, 29, 29}, {16, 58, 58},
                                     {6, 62, 62},   {6, 124, 124}, {1, 128, 128}};
  REQUIRE(s.size() == expected.size());
  for (std::size_t l = 0; l < s.size(); ++l) {
    CHECK(s[l].channels == expected[l].channels);
    CHECK(s[l].height == expected[l].height);
    CHECK(s[l].width == expected[l].width);
  }
  const auto model = build_autoencoder(1);
  const auto fwd = forward(model, random_input(2));
  for (std::size_t l = 0; l < s.size(); ++l) {
    CHECK(fwd.cache.activations[l + 1].size() == s[l].size());
  }
}

TEST_CASE("initialization is deterministic per seed") {
  const auto a = build_autoencoder(9), b = build_autoencoder(9), c = build_autoencoder(10);
  CHECK(std::equal(a.params().begin(), a.params().end(), b.params().begin()));
  CHECK(!std::equal(a.params().begin(), a.params().end(), c.params().begin()));
}

TEST_CASE("forward") {
  const auto model = build_autoencoder(4);
  SUBCASE("zero input gives outputs strictly inside (0, 1)") {
    const auto fwd = forward(model, Matrix(kInputSize, kInputSize));
    for (double v : fwd.reconstruction.data) {
      CHECK(v > 0.0);
      CHECK(v < 1.0);
    }
  }
  SUBCASE("pure") {
    const auto x = random_input(5);
    CHECK(forward(model, x).reconstruction == forward(model, x).reconstruction);
  }
  SUBCASE("wrong input shape") {
    CHECK_THROWS_AS(forward(model, Matrix(64, 128)), ShapeError);
  }
}

TEST_CASE("mse loss") {
  Matrix y(1, 2), z(1, 2);
  y.data = {1, 1};
  CHECK(mse_loss(y, y) == 0.0);
  CHECK(mse_loss(y, z) == 1.0);
  y.data = {1, 0};
  CHECK(mse_loss(y, z) == 0.5);
  CHECK_THROWS_AS(mse_loss(y, Matrix(2, 1)), ShapeError);
}

TEST_CASE("gradient matches central differences on every parameterized layer") {
  auto model = build_autoencoder(21);
  const Matrix x = random_input(22);
  const auto fwd = forward(model, x);
  const ParamVector grad = backward(model, fwd.cache, x);
  Rng rng(23);
  int checked = 0;
  int bad = 0;
  for (int layer : {0, 2, 4, 6, 8}) {
    const std::size_t begin = model.layer_offset(layer);
    const std::size_t n = model.layers()[layer].param_count();
    // a wider step flips max-pool switches behind the first convolution
    const double h = layer == 0 ? 1e-7 : 1e-5;
    for (int k = 0; k < 50; ++k) {
      const std::size_t i = begin + rng.index(n);
      std::vector<double> p(model.params().begin(), model.params().end());
      const double orig = p[i];
      p[i] = orig + h;
      model.set_params(p);
      const double up = mse_loss(x, forward(model, x).reconstruction);
      p[i] = orig - h;
      model.set_params(p);
      const double down = mse_loss(x, forward(model, x).reconstruction);
      p[i] = orig;
      model.set_params(p);
      const double numeric = (up - down) / (2 * h);
      const double scale = std::max(std::abs(numeric), std::abs(grad[i]));
      if (std::abs(numeric - grad[i]) > 1e-2 * scale + 1e-8) ++bad;
      ++checked;
    }
  }
  CHECK(checked >= 200);
  CHECK(bad <= checked / 50);
}

TEST_CASE("decoder gradients agree tightly") {
  auto model = build_autoencoder(31);
  const Matrix x = random_input(32);
  const ParamVector grad = backward(model, forward(model, x).cache, x);
  Rng rng(33);
  for (int layer : {4, 6, 8}) {
    const std::size_t begin = model.layer_offset(layer);
    for (int k = 0; k < 20; ++k) {
      const std::size_t i = begin + rng.index(model.layers()[layer].param_count());
      std::vector<double> p(model.params().begin(), model.params().end());
      const double orig = p[i];
      p[i] = orig + 1e-5;
      model.set_params(p);
      const double up = mse_loss(x, forward(model, x).reconstruction);
      p[i] = orig - 1e-5;
      model.set_params(p);
      const double down = mse_loss(x, forward(model, x).reconstruction);
      p[i] = orig;
      model.set_params(p);
      const double numeric = (up - down) / 2e-5;
      CHECK(std::abs(numeric - grad[i]) <= 1e-4 * std::abs(grad[i]) + 1e-10);
    }
  }
}

TEST_CASE("stale cache is rejected") {
  auto model = build_autoencoder(2);
  const Matrix x = random_input(1);
  const auto fwd = forward(model, x);
  model.touch();
  CHECK_THROWS_AS(backward(model, fwd.cache, x), StaleCacheError);
}

TEST_CASE("sgd_epoch") {
  auto model = build_autoencoder(8);
  model.freeze_except_bottleneck();
  const auto data = random_segments(2, 40);

  SUBCASE("lr 0 gives a zero delta") {
    const auto d = sgd_epoch(model, data, 0.0, true);
    CHECK(d.size() == 841);
    for (double v : d.values()) CHECK(v == 0.0);
  }
  SUBCASE("mask_only leaves frozen parameters bitwise unchanged") {
    const std::vector<double> before(model.params().begin(), model.params().end());
    const auto d = sgd_epoch(model, data, 0.1, true);
    CHECK(d.size() == 841);
    const auto& mask = model.trainable_mask();
    for (std::size_t i = 0; i < before.size(); ++i) {
      if (!mask[i]) CHECK(model.params()[i] == before[i]);
    }
  }
  SUBCASE("one sample, one step") {
    const std::vector<FeatureSegment> one{data[0]};
    const auto g = backward(model, forward(model, one[0].values).cache, one[0].values);
    const auto theta = model.extract_masked();
    const auto d = sgd_epoch(model, one, 0.1, true);
    const auto& idx = model.masked_indices();
    for (std::size_t k = 0; k < idx.size(); ++k) {
      CHECK(theta[k] + d[k] == doctest::Approx(theta[k] - 0.1 * g[idx[k]]).epsilon(1e-14));
    }
  }
  SUBCASE("deterministic") {
    auto m2 = model;
    CHECK(sgd_epoch(model, data, 0.1, true) == sgd_epoch(m2, data, 0.1, true));
  }
  SUBCASE("frozen prefix gives the same update") {
    auto m2 = model;
    std::vector<FrozenPrefix> prefixes;
    for (const auto& s : data) {
      prefixes.push_back(compute_prefix(m2, s.values, lowest_trainable_layer(m2)));
    }
    CHECK(sgd_epoch(model, data, 0.1, true) == sgd_epoch(m2, data, prefixes, 0.1));
  }
  SUBCASE("empty data and negative lr") {
    CHECK_THROWS_AS(sgd_epoch(model, {}, 0.1, true), InvalidArgument);
    CHECK_THROWS_AS(sgd_epoch(model, data, -1.0, true), InvalidArgument);
  }
}

TEST_CASE("frozen prefix goes stale when leading layers change") {
  auto model = build_autoencoder(3);
  model.freeze_except_bottleneck();
  const auto prefix = compute_prefix(model, random_input(4), kBottleneckLayer);
  CHECK(forward_from(model, prefix).reconstruction ==
        forward(model, random_input(4)).reconstruction);
  std::vector<double> p(model.params().begin(), model.params().end());
  p[0] += 0.5;
  model.set_params(p);
  CHECK_THROWS_AS(forward_from(model, prefix), StaleCacheError);
}

TEST_CASE("reinit, extract and apply") {
  auto m1 = build_autoencoder(5);
  m1.freeze_except_bottleneck();
  auto m2 = m1;
  m2.reinit_trainable(77);
  CHECK(m2.masked_count() == 841);
  CHECK(!(m1.extract_masked() == m2.extract_masked()));
  const auto& mask = m1.trainable_mask();
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) CHECK(m1.params()[i] == m2.params()[i]);
  }
  auto m3 = m1;
  m3.reinit_trainable(78);
  CHECK(!(m3.extract_masked() == m2.extract_masked()));

  auto m4 = m1;
  m4.apply_delta(m2.extract_masked() - m1.extract_masked());
  const auto a = m4.extract_masked(), b = m2.extract_masked();
  for (std::size_t k = 0; k < a.size(); ++k) CHECK(a[k] == doctest::Approx(b[k]).epsilon(1e-15));

  auto m5 = m1;
  m5.apply_delta(ParamVector::zeros(841));
  CHECK(m5.extract_masked() == m1.extract_masked());
}

TEST_CASE("pretrain") {
  const auto data = random_segments(4, 60);
  SUBCASE("zero epochs leaves the model unchanged") {
    auto m = build_autoencoder(6);
    const auto before = m.extract_masked();
    CHECK(pretrain(m, data, 0, 0.1).empty());
    CHECK(m.extract_masked() == before);
  }
  SUBCASE("deterministic trace") {
    auto a = build_autoencoder(6), b = build_autoencoder(6);
    CHECK(pretrain(a, data, 2, 0.1) == pretrain(b, data, 2, 0.1));
  }
  SUBCASE("non-finite parameters raise DivergenceError") {
    auto m = build_autoencoder(6);
    std::vector<double> p(m.params().begin(), m.params().end());
    p[m.layer_offset(8)] = INFINITY;
    m.set_params(p);
    try {
      pretrain(m, data, 3, 0.1);
      FAIL("expected divergence");
    } catch (const DivergenceError& e) {
      CHECK(e.epoch() == 1);
    }
  }
}

TEST_CASE("checkpoint round trip") {
  auto m = build_autoencoder(12);
  m.freeze_except_bottleneck();
  const std::string bytes = encode_checkpoint(m);
  const auto back = decode_checkpoint(bytes);
  CHECK(back.seed() == 12);
  CHECK(std::equal(m.params().begin(), m.params().end(), back.params().begin()));
  CHECK(back.masked_count() == 841);
  CHECK(encode_checkpoint(back) == bytes);

  std::string bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(decode_checkpoint(bad), FormatError);
  CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, bytes.size() - 3)), FormatError);
  CHECK_THROWS_AS(decode_checkpoint(bytes + "x"), FormatError);
}
