#include "asncfl/acoustics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>

#include "asncfl/errors.hpp"
#include "asncfl/fft.hpp"
#include "asncfl/rng.hpp"

namespace asncfl::acoustics {

namespace {

constexpr std::uint64_t kStreamScenario = 0x5CE0;
constexpr std::uint64_t kStreamRir = 0x0121;
constexpr std::uint64_t kStreamUtterance = 0x077E;
constexpr std::uint64_t kStreamSource = 0x50CE;

constexpr double kWallMargin = 0.1;
constexpr double kMinSourceOffset = 0.3;
constexpr double kDecay60dB = 6.907755278982137;  // ln(1000)

Vec3 uniform_in_room(Rng& rng, const Room& room, double margin) {
  return {rng.uniform(margin, room.x - margin),
          rng.uniform(margin, room.y - margin),
          rng.uniform(margin, room.z - margin)};
}

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

struct Formant {
  double center_hz;
  double bandwidth_hz;
  double amplitude;
};

// Three vowel-like variants per kind; scaled per talker.
std::vector<std::vector<Formant>> vowel_set(int kind) {
  if (kind == 0) {
    return {
        {{450, 150, 1.0}, {1200, 200, 0.45}, {2300, 250, 0.15}},
        {{350, 120, 1.0}, {900, 180, 0.5}, {2100, 250, 0.12}},
        {{600, 160, 1.0}, {1500, 220, 0.4}, {2500, 250, 0.15}},
    };
  }
  return {
      {{700, 150, 0.45}, {2200, 300, 1.0}, {3800, 450, 0.75}},
      {{550, 140, 0.4}, {2600, 300, 1.0}, {4200, 450, 0.8}},
      {{850, 160, 0.5}, {1900, 280, 1.0}, {3400, 420, 0.7}},
  };
}

double envelope(const std::vector<Formant>& formants, double scale, double f) {
  double e = 0.02;
  for (const Formant& fm : formants) {
    const double u = (f - fm.center_hz * scale) / fm.bandwidth_hz;
    e += fm.amplitude * std::exp(-0.5 * u * u);
  }
  return e;
}

}  // namespace

double distance(const Vec3& a, const Vec3& b) {
  const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

bool Room::contains_strictly(const Vec3& p) const {
  return p.x > 0.0 && p.x < x && p.y > 0.0 && p.y < y && p.z > 0.0 && p.z < z;
}

double critical_distance(const Room& room, double t60) {
  if (!(t60 > 0.0)) throw InvalidArgument("T60 must be positive");
  return 0.057 * std::sqrt(room.volume() / t60);
}

void validate_scenario(const Scenario& s) {
  if (s.sources.size() != 2) throw ConstraintError("scenario needs exactly 2 sources");
  if (s.nodes.empty()) throw ConstraintError("scenario has no nodes");
  for (const Source& src : s.sources) {
    if (!s.room.contains_strictly(src.position)) {
      throw ConstraintError("source outside the room");
    }
  }
  for (const Vec3& n : s.nodes) {
    if (!s.room.contains_strictly(n)) throw ConstraintError("node outside the room");
  }
  const double cx = s.room.x / 2.0, cy = s.room.y / 2.0;
  const Vec3& a = s.sources[0].position;
  const Vec3& b = s.sources[1].position;
  if (!((a.x - cx) * (b.x - cx) < 0.0 && (a.y - cy) * (b.y - cy) < 0.0)) {
    throw ConstraintError("sources are not in opposing quadrants");
  }
  const double rc = critical_distance(s.room, s.t60);
  for (std::size_t j = 0; j < s.sources.size(); ++j) {
    int within = 0;
    for (const Vec3& n : s.nodes) {
      if (distance(n, s.sources[j].position) < rc) ++within;
    }
    if (within < kNodesPerSourceInRc) {
      throw ConstraintError("source " + std::to_string(j) + " has only " +
                            std::to_string(within) +
                            " nodes within the critical distance");
    }
  }
  if (s.rir_seeds.size() != s.sources.size()) {
    throw ConstraintError("rir seed table does not match the sources");
  }
  for (const auto& row : s.rir_seeds) {
    if (row.size() != s.nodes.size()) {
      throw ConstraintError("rir seed table does not match the nodes");
    }
  }
}

Scenario generate_scenario(std::uint64_t seed, const ScenarioParams& params) {
  if (params.nodes < 2 * kNodesPerSourceInRc) {
    throw InvalidArgument("at least 6 nodes are needed (3 per source)");
  }
  if (params.utterances < 1 || !(params.utterance_seconds > 0.0)) {
    throw InvalidArgument("need at least one utterance of positive length");
  }
  const Room& room = params.room;
  if (room.x <= 2 * (kMinSourceOffset + kWallMargin) ||
      room.y <= 2 * (kMinSourceOffset + kWallMargin) || room.z <= 2 * kWallMargin) {
    throw InvalidArgument("room too small");
  }
  Rng rng(derive_seed(seed, kStreamScenario));
  int draws = 0;
  auto count_draw = [&] {
    if (++draws > kMaxScenarioDraws) {
      throw ConstraintError("scenario constraints unsatisfied after " +
                            std::to_string(kMaxScenarioDraws) + " draws");
    }
  };

  Scenario s;
  s.seed = seed;
  s.room = room;
  s.t60 = params.t60;
  s.utterance_seconds = params.utterance_seconds;
  const double rc = critical_distance(room, params.t60);
  const double cx = room.x / 2.0, cy = room.y / 2.0;

  const double sx = rng.bernoulli(0.5) ? 1.0 : -1.0;
  const double sy = rng.bernoulli(0.5) ? 1.0 : -1.0;
  const int first_kind = rng.bernoulli(0.5) ? 1 : 0;
  for (int j = 0; j < 2; ++j) {
    count_draw();
    const double sign = j == 0 ? 1.0 : -1.0;
    Source src;
    src.position = {
        cx + sign * sx * rng.uniform(kMinSourceOffset, cx - kWallMargin),
        cy + sign * sy * rng.uniform(kMinSourceOffset, cy - kWallMargin),
        rng.uniform(kWallMargin, room.z - kWallMargin)};
    src.kind = j == 0 ? first_kind : 1 - first_kind;
    for (int u = 0; u < params.utterances; ++u) {
      src.utterance_seeds.push_back(derive_seed(seed, kStreamUtterance, j, u));
    }
    s.sources.push_back(std::move(src));
  }

  // Nodes inside each source's critical-distance ball.
  for (int j = 0; j < 2; ++j) {
    const Vec3 c = s.sources[j].position;
    for (int n = 0; n < kNodesPerSourceInRc; ++n) {
      while (true) {
        count_draw();
        const Vec3 p{c.x + rng.uniform(-rc, rc), c.y + rng.uniform(-rc, rc),
                     c.z + rng.uniform(-rc, rc)};
        if (distance(p, c) < rc && p.x > kWallMargin && p.x < room.x - kWallMargin &&
            p.y > kWallMargin && p.y < room.y - kWallMargin && p.z > kWallMargin &&
            p.z < room.z - kWallMargin) {
          s.nodes.push_back(p);
          break;
        }
      }
    }
  }
  while (static_cast<int>(s.nodes.size()) < params.nodes) {
    count_draw();
    s.nodes.push_back(uniform_in_room(rng, room, kWallMargin));
  }
  for (std::size_t i = s.nodes.size() - 1; i > 0; --i) {
    std::swap(s.nodes[i], s.nodes[rng.index(i + 1)]);
  }

  s.rir_seeds.assign(2, std::vector<std::uint64_t>(s.nodes.size()));
  for (int j = 0; j < 2; ++j) {
    for (std::size_t n = 0; n < s.nodes.size(); ++n) {
      s.rir_seeds[j][n] = derive_seed(seed, kStreamRir, j, n);
    }
  }
  validate_scenario(s);
  return s;
}

SyntheticRIR synth_rir_for_distance(double dist, double critical_dist,
                                    double t60, std::uint64_t seed,
                                    int sample_rate) {
  if (!(dist >= 0.0) || !(critical_dist > 0.0) || !(t60 > 0.0)) {
    throw InvalidArgument("invalid impulse-response geometry");
  }
  SyntheticRIR rir;
  rir.first_peak_delay = dist / kSpeedOfSound;
  const auto direct_idx =
      static_cast<std::size_t>(std::llround(rir.first_peak_delay * sample_rate));
  const auto tail_len = static_cast<std::size_t>(std::ceil(t60 * sample_rate));
  rir.taps.assign(direct_idx + tail_len + 1, 0.0);
  rir.taps[direct_idx] = 1.0 / std::max(dist, kMinAmplitudeDistance);

  Rng rng(seed);
  double energy = 0.0;
  for (std::size_t n = 1; n <= tail_len; ++n) {
    const double t = static_cast<double>(n) / sample_rate;
    const double v = rng.normal() * std::exp(-kDecay60dB * t / t60);
    rir.taps[direct_idx + n] = v;
    energy += v * v;
  }
  const double target = 1.0 / (critical_dist * critical_dist);
  const double gain = std::sqrt(target / energy);
  for (std::size_t n = 1; n <= tail_len; ++n) rir.taps[direct_idx + n] *= gain;
  return rir;
}

SyntheticRIR synth_rir(const Scenario& scenario, int source, int node,
                       int sample_rate) {
  const double d = distance(scenario.sources.at(source).position,
                            scenario.nodes.at(node));
  SyntheticRIR rir = synth_rir_for_distance(
      d, critical_distance(scenario.room, scenario.t60), scenario.t60,
      scenario.rir_seeds.at(source).at(node), sample_rate);
  rir.source_id = source;
  rir.node_id = node;
  return rir;
}

features::AudioClip render_node_signal(const features::AudioClip& s1,
                                       const features::AudioClip& s2,
                                       const SyntheticRIR& g1,
                                       const SyntheticRIR& g2) {
  if (s1.samples.size() != s2.samples.size()) {
    throw InvalidArgument("source clips differ in length");
  }
  if (s1.sample_rate != s2.sample_rate) {
    throw InvalidArgument("source clips differ in sample rate");
  }
  const std::size_t len = s1.samples.size();
  features::AudioClip out;
  out.sample_rate = s1.sample_rate;
  out.samples = convolve_truncated(s1.samples, g1.taps, len);
  const std::vector<double> second = convolve_truncated(s2.samples, g2.taps, len);
  for (std::size_t n = 0; n < len; ++n) out.samples[n] += second[n];
  return out;
}

features::AudioClip render_node_signal(const Scenario& scenario,
                                       const features::AudioClip& s1,
                                       const features::AudioClip& s2, int node) {
  return render_node_signal(s1, s2, synth_rir(scenario, 0, node, s1.sample_rate),
                            synth_rir(scenario, 1, node, s1.sample_rate));
}

std::vector<features::AudioClip> render_all_nodes(const Scenario& scenario,
                                                  const features::AudioClip& s1,
                                                  const features::AudioClip& s2) {
  if (s1.samples.size() != s2.samples.size()) {
    throw InvalidArgument("source clips differ in length");
  }
  const std::size_t len = s1.samples.size();
  std::vector<SyntheticRIR> rirs[2];
  std::size_t longest = 0;
  for (int j = 0; j < 2; ++j) {
    for (std::size_t n = 0; n < scenario.nodes.size(); ++n) {
      rirs[j].push_back(synth_rir(scenario, j, static_cast<int>(n), s1.sample_rate));
      longest = std::max(longest, rirs[j].back().taps.size());
    }
  }
  const std::size_t nfft = next_pow2(len + longest - 1);
  RealFft fft(nfft);
  std::vector<std::complex<double>> spectra[2];
  for (int j = 0; j < 2; ++j) {
    std::vector<double> padded(nfft, 0.0);
    const auto& src = j == 0 ? s1.samples : s2.samples;
    std::copy(src.begin(), src.end(), padded.begin());
    fft.forward(padded, spectra[j]);
  }
  std::vector<features::AudioClip> out;
  std::vector<double> padded(nfft);
  std::vector<std::complex<double>> g, acc;
  std::vector<double> y;
  const double scale = 1.0 / static_cast<double>(nfft);
  for (std::size_t n = 0; n < scenario.nodes.size(); ++n) {
    acc.assign(fft.bins(), {});
    for (int j = 0; j < 2; ++j) {
      std::fill(padded.begin(), padded.end(), 0.0);
      std::copy(rirs[j][n].taps.begin(), rirs[j][n].taps.end(), padded.begin());
      fft.forward(padded, g);
      for (std::size_t k = 0; k < g.size(); ++k) acc[k] += spectra[j][k] * g[k];
    }
    fft.inverse(acc, y);
    features::AudioClip clip;
    clip.sample_rate = s1.sample_rate;
    clip.samples.assign(len, 0.0);
    for (std::size_t i = 0; i < len; ++i) clip.samples[i] = y[i] * scale;
    out.push_back(std::move(clip));
  }
  return out;
}

features::AudioClip synth_source_signal(int kind, std::uint64_t seed,
                                        double duration_s, int sample_rate) {
  if (!(duration_s > 0.0)) throw InvalidArgument("duration must be positive");
  if (kind < 0 || kind >= kSourceKinds) {
    throw InvalidArgument("unknown source kind " + std::to_string(kind));
  }
  const auto len = static_cast<std::size_t>(std::llround(duration_s * sample_rate));
  if (len == 0) throw InvalidArgument("duration shorter than one sample");
  Rng rng(derive_seed(seed, kStreamSource, static_cast<std::uint64_t>(kind)));
  const double fs = sample_rate;

  // Excitation: pulse train with slow vibrato and jitter, plus noise.
  const double f0 = kind == 0 ? rng.uniform(95.0, 135.0) : rng.uniform(185.0, 245.0);
  const double vib_rate = rng.uniform(0.3, 0.8);
  const double vib_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  std::vector<double> excitation(len);
  double phase = 0.0;
  for (std::size_t n = 0; n < len; ++n) {
    const double t = static_cast<double>(n) / fs;
    const double f = f0 * (1.0 + 0.06 * std::sin(2.0 * std::numbers::pi * vib_rate * t +
                                                 vib_phase));
    phase += f / fs;
    double v = 0.15 * rng.normal();
    if (phase >= 1.0) {
      phase -= std::floor(phase);
      v += 1.0 + 0.1 * rng.normal();
    }
    excitation[n] = v;
  }

  // One filtered copy per vowel variant.
  const std::size_t nfft = next_pow2(len);
  RealFft fft(nfft);
  std::vector<double> padded(nfft, 0.0);
  std::copy(excitation.begin(), excitation.end(), padded.begin());
  std::vector<std::complex<double>> spec;
  fft.forward(padded, spec);
  const double formant_scale = rng.uniform(0.93, 1.07);
  const auto vowels = vowel_set(kind);
  std::vector<std::vector<double>> variants;
  for (const auto& formants : vowels) {
    std::vector<std::complex<double>> shaped(spec.size());
    for (std::size_t k = 0; k < spec.size(); ++k) {
      const double f = static_cast<double>(k) * fs / static_cast<double>(nfft);
      shaped[k] = spec[k] * envelope(formants, formant_scale, f);
    }
    std::vector<double> y;
    fft.inverse(shaped, y);
    y.resize(len);
    variants.push_back(std::move(y));
  }

  // Syllabic pattern: voiced segments with a vowel choice, separated by
  // short gaps and occasional pauses; 20 ms raised-cosine ramps.
  std::vector<double> gain(len, 0.0);
  std::vector<int> vowel(len, 0);
  std::size_t pos = 0;
  while (pos < len) {
    const auto syl = static_cast<std::size_t>(rng.uniform(0.12, 0.35) * fs);
    const double amp = rng.uniform(0.5, 1.0);
    const int v = static_cast<int>(rng.index(vowels.size()));
    const auto ramp = static_cast<std::size_t>(0.02 * fs);
    for (std::size_t n = 0; n < syl && pos + n < len; ++n) {
      double w = 1.0;
      if (n < ramp) w = 0.5 - 0.5 * std::cos(std::numbers::pi * n / ramp);
      if (syl - n < ramp) w = 0.5 - 0.5 * std::cos(std::numbers::pi * (syl - n) / ramp);
      gain[pos + n] = amp * w;
      vowel[pos + n] = v;
    }
    pos += syl;
    const double gap_s = rng.bernoulli(0.12) ? rng.uniform(0.3, 0.6) : rng.uniform(0.03, 0.15);
    const auto gap = static_cast<std::size_t>(gap_s * fs);
    for (std::size_t n = 0; n < gap && pos + n < len; ++n) {
      gain[pos + n] = 0.02;
      vowel[pos + n] = v;
    }
    pos += gap;
  }

  features::AudioClip clip;
  clip.sample_rate = sample_rate;
  clip.samples.resize(len);
  double energy = 0.0;
  for (std::size_t n = 0; n < len; ++n) {
    clip.samples[n] = gain[n] * variants[vowel[n]][n];
    energy += clip.samples[n] * clip.samples[n];
  }
  const double rms = std::sqrt(energy / static_cast<double>(len));
  if (rms > 0.0) {
    for (double& x : clip.samples) x /= rms;
  }
  return clip;
}

double first_peak_delay(const Scenario& scenario, int source, int node) {
  return distance(scenario.sources.at(source).position, scenario.nodes.at(node)) /
         kSpeedOfSound;
}

int dominant_source(const Scenario& scenario, int node) {
  int best = 0;
  double best_delay = first_peak_delay(scenario, 0, node);
  for (int j = 1; j < static_cast<int>(scenario.sources.size()); ++j) {
    const double d = first_peak_delay(scenario, j, node);
    if (d < best_delay) {
      best = j;
      best_delay = d;
    }
  }
  return best;
}

}  // namespace asncfl::acoustics
