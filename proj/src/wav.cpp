#include "asncfl/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "asncfl/errors.hpp"

namespace asncfl {

namespace {

std::uint32_t le32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put32(std::ostream& os, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v),
                              static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put16(std::ostream& os, std::uint16_t v) {
  const unsigned char b[2] = {static_cast<unsigned char>(v),
                              static_cast<unsigned char>(v >> 8)};
  os.write(reinterpret_cast<const char*>(b), 2);
}

}  // namespace

features::AudioClip read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw FormatError(path.string() + " is not a RIFF/WAVE file");
  }
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint32_t size = le32(&bytes[pos + 4]);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) throw FormatError("truncated chunk in " + path.string());
    if (std::memcmp(&bytes[pos], "fmt ", 4) == 0) {
      if (size < 16) throw FormatError("short fmt chunk");
      const std::uint16_t format = le16(&bytes[body]);
      const std::uint16_t channels = le16(&bytes[body + 2]);
      const std::uint32_t rate = le32(&bytes[body + 4]);
      const std::uint16_t bits = le16(&bytes[body + 14]);
      if (format != 1 || channels != 1 || bits != 16) {
        throw FormatError(path.string() + ": only 16-bit mono PCM is supported");
      }
      if (rate != static_cast<std::uint32_t>(features::kSampleRate)) {
        throw FormatError(path.string() + ": sample rate must be 16000 Hz");
      }
      have_fmt = true;
    } else if (std::memcmp(&bytes[pos], "data", 4) == 0) {
      if (!have_fmt) throw FormatError("data chunk before fmt chunk");
      features::AudioClip clip;
      clip.samples.resize(size / 2);
      for (std::size_t n = 0; n < clip.samples.size(); ++n) {
        const auto v = static_cast<std::int16_t>(le16(&bytes[body + 2 * n]));
        clip.samples[n] = v / 32768.0;
      }
      return clip;
    }
    pos = body + size + (size & 1u);
  }
  throw FormatError(path.string() + " has no data chunk");
}

void write_wav(const std::filesystem::path& path, const features::AudioClip& clip) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot write " + path.string());
  const auto data_bytes = static_cast<std::uint32_t>(clip.samples.size() * 2);
  os.write("RIFF", 4);
  put32(os, 36 + data_bytes);
  os.write("WAVEfmt ", 8);
  put32(os, 16);
  put16(os, 1);
  put16(os, 1);
  put32(os, static_cast<std::uint32_t>(clip.sample_rate));
  put32(os, static_cast<std::uint32_t>(clip.sample_rate) * 2);
  put16(os, 2);
  put16(os, 16);
  os.write("data", 4);
  put32(os, data_bytes);
  for (double x : clip.samples) {
    const double s = std::clamp(std::round(x * 32768.0), -32768.0, 32767.0);
    put16(os, static_cast<std::uint16_t>(static_cast<std::int16_t>(s)));
  }
}

}  // namespace asncfl
