#include "asncfl/features.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>

#include "asncfl/errors.hpp"
#include "asncfl/fft.hpp"

namespace asncfl::features {

namespace {

std::size_t whole_samples(double seconds, int rate, const char* what) {
  const double n = seconds * rate;
  const double rounded = std::round(n);
  if (rounded < 1.0 || std::abs(n - rounded) > 1e-6) {
    throw InvalidArgument(std::string(what) +
                          " must be a whole, positive number of samples");
  }
  return static_cast<std::size_t>(rounded);
}

}  // namespace

Matrix stft_power(const AudioClip& clip, double win_s, double hop_s) {
  if (clip.sample_rate <= 0) throw InvalidArgument("sample rate must be positive");
  const std::size_t win = whole_samples(win_s, clip.sample_rate, "window");
  const std::size_t hop = whole_samples(hop_s, clip.sample_rate, "hop");
  if (clip.samples.size() < win) {
    throw InvalidArgument("clip of " + std::to_string(clip.samples.size()) +
                          " samples is shorter than one window (" +
                          std::to_string(win) + ")");
  }
  const std::size_t frames = (clip.samples.size() - win) / hop + 1;
  RealFft fft(win);
  std::vector<double> window(win);
  for (std::size_t n = 0; n < win; ++n) {
    // periodic Hann
    window[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi *
                                     static_cast<double>(n) /
                                     static_cast<double>(win));
  }
  Matrix power(frames, fft.bins());
  std::vector<double> frame(win);
  std::vector<std::complex<double>> spec;
  for (std::size_t f = 0; f < frames; ++f) {
    const double* src = clip.samples.data() + f * hop;
    for (std::size_t n = 0; n < win; ++n) frame[n] = src[n] * window[n];
    fft.forward(frame, spec);
    for (std::size_t k = 0; k < spec.size(); ++k) power(f, k) = std::norm(spec[k]);
  }
  return power;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

MelFilterbank mel_filterbank(int num_filters, int nfft, int sample_rate) {
  if (num_filters < 2) throw InvalidArgument("need at least 2 mel filters");
  if (nfft < 2 || sample_rate <= 0) {
    throw InvalidArgument("invalid FFT length or sample rate");
  }
  const std::size_t bins = static_cast<std::size_t>(nfft) / 2 + 1;
  const double mel_hi = hz_to_mel(sample_rate / 2.0);
  std::vector<double> edges(num_filters + 2);
  for (int i = 0; i < num_filters + 2; ++i) {
    edges[i] = mel_to_hz(mel_hi * i / (num_filters + 1));
  }
  MelFilterbank fb;
  fb.nfft = nfft;
  fb.sample_rate = sample_rate;
  fb.weights = Matrix(num_filters, bins);
  for (int m = 0; m < num_filters; ++m) {
    const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    fb.center_hz.push_back(mid);
    double peak = 0.0;
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / nfft;
      double w = 0.0;
      if (f > lo && f <= mid) {
        w = (f - lo) / (mid - lo);
      } else if (f > mid && f < hi) {
        w = (hi - f) / (hi - mid);
      }
      fb.weights(m, k) = w;
      peak = std::max(peak, w);
    }
    if (peak <= 0.0) {
      throw InvalidArgument("mel filter " + std::to_string(m) +
                            " covers no FFT bin; too many filters for nfft");
    }
    for (std::size_t k = 0; k < bins; ++k) fb.weights(m, k) /= peak;
  }
  return fb;
}

Matrix mel_energies(const AudioClip& clip, const MelFilterbank& fb,
                    const LmbeParams& params) {
  if (clip.sample_rate != fb.sample_rate) {
    throw InvalidArgument("clip and filterbank sample rates differ");
  }
  const Matrix power = stft_power(clip, params.win_s, params.hop_s);
  if (power.cols != fb.weights.cols) {
    throw ShapeError("filterbank FFT size does not match the STFT window");
  }
  const std::size_t bands = fb.weights.rows;
  Matrix mel(power.rows, bands);
  for (std::size_t f = 0; f < power.rows; ++f) {
    const double* p = &power.data[f * power.cols];
    for (std::size_t m = 0; m < bands; ++m) {
      const double* w = &fb.weights.data[m * fb.weights.cols];
      double acc = 0.0;
      for (std::size_t k = 0; k < power.cols; ++k) acc += w[k] * p[k];
      mel(f, m) = acc;
    }
  }
  return mel;
}

void minmax_normalize(Matrix& m) {
  if (m.size() == 0) return;
  const auto [lo_it, hi_it] = std::minmax_element(m.data.begin(), m.data.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (hi == lo) {
    std::fill(m.data.begin(), m.data.end(), 0.5);
    return;
  }
  const double inv = 1.0 / (hi - lo);
  for (double& x : m.data) x = std::clamp((x - lo) * inv, 0.0, 1.0);
}

std::vector<nn::FeatureSegment> lmbe_segments(const AudioClip& clip,
                                              const MelFilterbank& fb,
                                              const LmbeParams& params,
                                              int node_id) {
  const Matrix mel = mel_energies(clip, fb, params);
  const std::size_t seg = static_cast<std::size_t>(params.segment_frames);
  if (mel.rows < seg) {
    throw InvalidArgument("clip yields " + std::to_string(mel.rows) +
                          " frames; at least " + std::to_string(seg) +
                          " are needed for one segment");
  }
  const std::size_t bands = mel.cols;
  std::vector<nn::FeatureSegment> out;
  for (std::size_t s = 0; s + 1 <= mel.rows / seg; ++s) {
    nn::FeatureSegment fs;
    fs.node_id = node_id;
    fs.segment_index = static_cast<int>(s);
    fs.values = Matrix(bands, seg);
    for (std::size_t t = 0; t < seg; ++t) {
      for (std::size_t m = 0; m < bands; ++m) {
        fs.values(m, t) = std::log(mel(s * seg + t, m) + params.log_floor);
      }
    }
    minmax_normalize(fs.values);
    out.push_back(std::move(fs));
  }
  return out;
}

}  // namespace asncfl::features
