#include <doctest.h>

#include <cmath>
#include <numbers>

#include "asncfl/errors.hpp"
#include "asncfl/features.hpp"
#include "asncfl/rng.hpp"

using namespace asncfl;
using namespace asncfl::features;

namespace {

AudioClip noise_clip(double seconds, std::uint64_t seed) {
  Rng rng(seed);
  AudioClip c;
  c.samples.resize(static_cast<std::size_t>(seconds * kSampleRate));
  for (auto& x : c.samples) x = rng.normal();
  return c;
}

}  // namespace

TEST_CASE("stft frame count and shape") {
  const auto p = stft_power(noise_clip(10.0, 1), 0.064, 0.032);
  CHECK(p.rows == 311);
  CHECK(p.cols == 513);
  CHECK_THROWS_AS(stft_power(noise_clip(10.0, 1), 0.0641, 0.032), InvalidArgument);
  AudioClip tiny;
  tiny.samples.assign(100, 0.0);
  CHECK_THROWS_AS(stft_power(tiny, 0.064, 0.032), InvalidArgument);
}

TEST_CASE("stft peak of a pure tone") {
  AudioClip c;
  c.samples.resize(kSampleRate);
  const double f = 1000.0;
  for (std::size_t n = 0; n < c.samples.size(); ++n) {
    c.samples[n] = std::sin(2 * std::numbers::pi * f * n / kSampleRate);
  }
  const auto p = stft_power(c, 0.064, 0.032);
  std::size_t best = 0;
  for (std::size_t k = 0; k < p.cols; ++k) {
    if (p(3, k) > p(3, best)) best = k;
  }
  CHECK(best == 64);  // 1000 Hz / (16000 / 1024)
}

TEST_CASE("mel scale") {
  CHECK(hz_to_mel(0.0) == 0.0);
  CHECK(hz_to_mel(700.0) == doctest::Approx(2595.0 * std::log10(2.0)));
  for (double hz : {10.0, 440.0, 8000.0}) CHECK(mel_to_hz(hz_to_mel(hz)) == doctest::Approx(hz));
}

TEST_CASE("mel filterbank") {
  const auto fb = mel_filterbank(128, 1024, kSampleRate);
  CHECK(fb.weights.rows == 128);
  CHECK(fb.weights.cols == 513);
  for (std::size_t k = 0; k < fb.weights.rows; ++k) {
    double peak = 0.0;
    for (std::size_t j = 0; j < fb.weights.cols; ++j) {
      CHECK(fb.weights(k, j) >= 0.0);
      peak = std::max(peak, fb.weights(k, j));
    }
    CHECK(peak == doctest::Approx(1.0));
  }
  for (std::size_t k = 1; k < fb.center_hz.size(); ++k) {
    CHECK(fb.center_hz[k] > fb.center_hz[k - 1]);
  }
}

TEST_CASE("lmbe segments of a ten second clip") {
  const auto fb = mel_filterbank(128, 1024, kSampleRate);
  const auto segs = lmbe_segments(noise_clip(10.0, 3), fb, {}, 5);
  REQUIRE(segs.size() == 2);
  for (int i = 0; i < 2; ++i) {
    const auto& s = segs[i];
    CHECK(s.values.rows == 128);
    CHECK(s.values.cols == 128);
    CHECK(s.node_id == 5);
    CHECK(s.segment_index == i);
    double lo = 1.0, hi = 0.0;
    for (double v : s.values.data) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    CHECK(lo == 0.0);
    CHECK(hi == doctest::Approx(1.0).epsilon(1e-15));
  }
}

TEST_CASE("silent clip gives constant 0.5 segments") {
  const auto fb = mel_filterbank(128, 1024, kSampleRate);
  AudioClip silent;
  silent.samples.assign(10 * kSampleRate, 0.0);
  const auto segs = lmbe_segments(silent, fb);
  REQUIRE(segs.size() == 2);
  for (double v : segs[0].values.data) CHECK(v == 0.5);
}

TEST_CASE("too short for one segment") {
  const auto fb = mel_filterbank(128, 1024, kSampleRate);
  CHECK_THROWS_AS(lmbe_segments(noise_clip(2.0, 4), fb), InvalidArgument);
}
