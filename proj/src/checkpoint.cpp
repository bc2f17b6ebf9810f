#include "asncfl/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "asncfl/errors.hpp"

namespace asncfl::nn {

namespace {

constexpr char kMagic[8] = {'A', 'S', 'N', 'C', 'F', 'L', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint encoding assumes a little-endian host");

template <typename T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > bytes_.size()) throw FormatError("checkpoint is truncated");
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const AutoencoderModel& model) {
  std::string out(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, model.seed());
  const auto& layers = model.layers();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(layers.size()));
  for (const LayerSpec& l : layers) {
    for (int v : {static_cast<int>(l.kind), l.in_channels, l.out_channels, l.kernel_h,
                  l.kernel_w, l.stride, static_cast<int>(l.activation)}) {
      put<std::int32_t>(out, v);
    }
  }
  put<std::uint64_t>(out, model.param_count());
  for (std::uint8_t m : model.trainable_mask()) put<std::uint8_t>(out, m);
  for (double v : model.params()) put<double>(out, v);
  return out;
}

AutoencoderModel decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw FormatError("not a checkpoint file (bad magic)");
  }
  Reader r(bytes);
  for (std::size_t i = 0; i < sizeof kMagic; ++i) r.get<char>();
  const auto version = r.get<std::uint32_t>();
  if (version != kVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  AutoencoderModel model(r.get<std::uint64_t>());
  const auto& layers = model.layers();
  if (r.get<std::uint32_t>() != layers.size()) throw FormatError("layer count mismatch");
  for (const LayerSpec& l : layers) {
    for (int expected : {static_cast<int>(l.kind), l.in_channels, l.out_channels,
                         l.kernel_h, l.kernel_w, l.stride, static_cast<int>(l.activation)}) {
      if (r.get<std::int32_t>() != expected) throw FormatError("layer table mismatch");
    }
  }
  const auto count = r.get<std::uint64_t>();
  if (count != model.param_count()) throw FormatError("parameter count mismatch");
  std::vector<std::uint8_t> mask(count);
  for (auto& m : mask) m = r.get<std::uint8_t>();
  std::vector<double> params(count);
  for (auto& p : params) p = r.get<double>();
  if (!r.done()) throw FormatError("trailing bytes after checkpoint payload");
  model.set_params(params);
  model.set_trainable_mask(mask);
  return model;
}

void save_checkpoint(const AutoencoderModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write checkpoint " + path);
  const std::string bytes = encode_checkpoint(model);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing checkpoint " + path);
}

AutoencoderModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot read checkpoint " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return decode_checkpoint(buf.str());
}

}  // namespace asncfl::nn
