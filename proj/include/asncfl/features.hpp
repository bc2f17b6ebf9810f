#pragma once

#include <vector>

#include "asncfl/matrix.hpp"
#include "asncfl/nn.hpp"

namespace asncfl::features {

inline constexpr int kSampleRate = 16000;

struct AudioClip {
  std::vector<double> samples;
  int sample_rate = kSampleRate;

  double duration() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

// Hann-windowed |STFT|^2, frames x (win/2 + 1). Window and hop given in
// seconds must map to whole sample counts.
Matrix stft_power(const AudioClip& clip, double win_s, double hop_s);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

struct MelFilterbank {
  Matrix weights;  // K x (nfft/2 + 1)
  std::vector<double> center_hz;
  int nfft = 0;
  int sample_rate = 0;

  int num_filters() const { return static_cast<int>(weights.rows); }
};

// K triangles whose edges/centers are K+2 points equally spaced on the mel
// scale from 0 Hz to rate/2; each row scaled to a peak weight of exactly 1.
MelFilterbank mel_filterbank(int num_filters, int nfft, int sample_rate);

struct LmbeParams {
  double win_s = 0.064;
  double hop_s = 0.032;
  int segment_frames = 128;
  double log_floor = 1e-10;
};

// frames x K mel band energies (before the log).
Matrix mel_energies(const AudioClip& clip, const MelFilterbank& fb,
                    const LmbeParams& params = {});

// Min-max normalization to [0, 1]; a constant matrix becomes all 0.5.
void minmax_normalize(Matrix& m);

// log(mel energy + floor), cut into non-overlapping segments of
// segment_frames frames (trailing remainder dropped), each transposed to
// bands x frames and min-max normalized.
std::vector<nn::FeatureSegment> lmbe_segments(const AudioClip& clip,
                                              const MelFilterbank& fb,
                                              const LmbeParams& params = {},
                                              int node_id = -1);

}  // namespace asncfl::features
