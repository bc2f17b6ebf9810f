#pragma once

// Shoebox scenarios with two simultaneously active sources and M microphone
// nodes, a synthetic impulse-response model and node-signal rendering.
//
// Impulse-response model (stand-in for a cone/ray tracer): a direct-path
// tap of amplitude 1/max(d, 0.1) at delay d/c, followed by a seeded
// Gaussian tail with amplitude envelope exp(-6.908 t / T60) (60 dB energy
// decay at T60). The tail is scaled so its energy is 1/r_c^2, i.e. the
// direct-to-reverberant ratio is exactly 1 at the critical distance r_c.

#include <cstdint>
#include <vector>

#include "asncfl/features.hpp"

namespace asncfl::acoustics {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  friend bool operator==(const Vec3&, const Vec3&) = default;
};

double distance(const Vec3& a, const Vec3& b);

struct Room {
  double x = 4.7;
  double y = 3.4;
  double z = 2.4;
  double volume() const { return x * y * z; }
  bool contains_strictly(const Vec3& p) const;
  friend bool operator==(const Room&, const Room&) = default;
};

inline constexpr double kSpeedOfSound = 343.0;
inline constexpr double kMinAmplitudeDistance = 0.1;
inline constexpr int kMaxScenarioDraws = 10000;
inline constexpr int kNodesPerSourceInRc = 3;

// 0.057 * sqrt(V / T60)
double critical_distance(const Room& room, double t60);

struct Source {
  Vec3 position;
  int kind = 0;  // spectral profile / class label of the talker
  std::vector<std::uint64_t> utterance_seeds;
};

struct Scenario {
  std::uint64_t seed = 0;
  Room room;
  double t60 = 0.34;
  double utterance_seconds = 10.0;
  std::vector<Source> sources;  // always 2
  std::vector<Vec3> nodes;
  // rir_seeds[source][node]
  std::vector<std::vector<std::uint64_t>> rir_seeds;
};

struct ScenarioParams {
  Room room;
  double t60 = 0.34;
  int nodes = 16;
  int utterances = 1;
  double utterance_seconds = 10.0;
};

// Rejection sampling, bounded at kMaxScenarioDraws position draws. Sources
// sit at opposite-sign (x, y) offsets from the floor center; three nodes per
// source are drawn inside its critical-distance ball and the rest uniformly;
// node order is then shuffled.
Scenario generate_scenario(std::uint64_t seed, const ScenarioParams& params);

// Throws ConstraintError naming the first violated scenario invariant.
void validate_scenario(const Scenario& scenario);

struct SyntheticRIR {
  std::vector<double> taps;
  double first_peak_delay = 0.0;  // seconds
  int source_id = -1;
  int node_id = -1;
};

SyntheticRIR synth_rir_for_distance(double distance, double critical_dist,
                                    double t60, std::uint64_t seed,
                                    int sample_rate = features::kSampleRate);

SyntheticRIR synth_rir(const Scenario& scenario, int source, int node,
                       int sample_rate = features::kSampleRate);

// x = s1 * g1 + s2 * g2, full convolutions truncated to the input length.
features::AudioClip render_node_signal(const features::AudioClip& s1,
                                       const features::AudioClip& s2,
                                       const SyntheticRIR& g1,
                                       const SyntheticRIR& g2);

features::AudioClip render_node_signal(const Scenario& scenario,
                                       const features::AudioClip& s1,
                                       const features::AudioClip& s2, int node);

// All node signals for one pair of source clips; reuses the source spectra.
std::vector<features::AudioClip> render_all_nodes(const Scenario& scenario,
                                                  const features::AudioClip& s1,
                                                  const features::AudioClip& s2);

inline constexpr int kSourceKinds = 2;

// Seeded, unit-RMS stand-in for a talker: a jittered pulse train plus
// aspiration noise, shaped by kind-specific formant envelopes that change
// per syllable, under a syllabic on/off amplitude pattern. Kind 0 carries
// its energy low (formants near 450/1200 Hz), kind 1 high (700/2200/3800 Hz).
features::AudioClip synth_source_signal(int kind, std::uint64_t seed,
                                        double duration_s,
                                        int sample_rate = features::kSampleRate);

double first_peak_delay(const Scenario& scenario, int source, int node);

// argmin over sources of the first-peak delay; ties go to source 0.
int dominant_source(const Scenario& scenario, int node);

}  // namespace asncfl::acoustics
