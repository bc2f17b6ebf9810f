#include "asncfl/nn.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <string>

#include "asncfl/errors.hpp"
#include "asncfl/rng.hpp"

namespace asncfl::nn {

namespace {

std::atomic<std::uint64_t> g_version_counter{1};

std::uint64_t next_version() { return g_version_counter.fetch_add(1); }

constexpr std::uint64_t kInitStream = 0xA5E1;

// Index of the maxpool layer whose argmax positions an unpool layer reuses.
int paired_pool(int layer) {
  switch (layer) {
    case 5:
      return 3;
    case 7:
      return 1;
    default:
      throw InvalidArgument("layer " + std::to_string(layer) +
                            " is not an unpool layer");
  }
}

// ---- kernels --------------------------------------------------------------
// All convolutions are valid (no padding) with stride 1.

void conv2d_forward(const double* in, Shape3 is, const double* w,
                    const double* b, Shape3 os, int k, double* out) {
  const int plane = os.height * os.width;
  for (int oc = 0; oc < os.channels; ++oc) {
    double* dst_plane = out + static_cast<std::size_t>(oc) * plane;
    std::fill(dst_plane, dst_plane + plane, b[oc]);
    for (int ic = 0; ic < is.channels; ++ic) {
      const double* src_plane =
          in + static_cast<std::size_t>(ic) * is.height * is.width;
      for (int kh = 0; kh < k; ++kh) {
        for (int kw = 0; kw < k; ++kw) {
          const double wv = w[((oc * is.channels + ic) * k + kh) * k + kw];
          for (int oh = 0; oh < os.height; ++oh) {
            const double* src = src_plane + (oh + kh) * is.width + kw;
            double* dst = dst_plane + oh * os.width;
#pragma omp simd
            for (int ow = 0; ow < os.width; ++ow) dst[ow] += wv * src[ow];
          }
        }
      }
    }
  }
}

// g: gradient w.r.t. the pre-activation output. din may be null.
void conv2d_backward(const double* in, Shape3 is, const double* w,
                     const double* g, Shape3 os, int k, double* dw,
                     double* db, double* din) {
  const int plane = os.height * os.width;
  for (int oc = 0; oc < os.channels; ++oc) {
    const double* g_plane = g + static_cast<std::size_t>(oc) * plane;
    if (db != nullptr) {
      double acc = 0.0;
#pragma omp simd reduction(+ : acc)
      for (int n = 0; n < plane; ++n) acc += g_plane[n];
      db[oc] += acc;
    }
    for (int ic = 0; ic < is.channels; ++ic) {
      const double* in_plane =
          in + static_cast<std::size_t>(ic) * is.height * is.width;
      double* din_plane =
          din ? din + static_cast<std::size_t>(ic) * is.height * is.width
              : nullptr;
      for (int kh = 0; kh < k; ++kh) {
        for (int kw = 0; kw < k; ++kw) {
          const int widx = ((oc * is.channels + ic) * k + kh) * k + kw;
          if (dw != nullptr) {
            double acc = 0.0;
            for (int oh = 0; oh < os.height; ++oh) {
              const double* src = in_plane + (oh + kh) * is.width + kw;
              const double* gr = g_plane + oh * os.width;
#pragma omp simd reduction(+ : acc)
              for (int ow = 0; ow < os.width; ++ow) acc += gr[ow] * src[ow];
            }
            dw[widx] += acc;
          }
          if (din_plane != nullptr) {
            const double wv = w[widx];
            for (int oh = 0; oh < os.height; ++oh) {
              double* dst = din_plane + (oh + kh) * is.width + kw;
              const double* gr = g_plane + oh * os.width;
#pragma omp simd
              for (int ow = 0; ow < os.width; ++ow) dst[ow] += wv * gr[ow];
            }
          }
        }
      }
    }
  }
}

void conv_transpose_forward(const double* in, Shape3 is, const double* w,
                            const double* b, Shape3 os, int k, double* out) {
  const int plane = os.height * os.width;
  for (int oc = 0; oc < os.channels; ++oc) {
    std::fill(out + static_cast<std::size_t>(oc) * plane,
              out + static_cast<std::size_t>(oc + 1) * plane, b[oc]);
  }
  for (int ic = 0; ic < is.channels; ++ic) {
    const double* src_plane =
        in + static_cast<std::size_t>(ic) * is.height * is.width;
    for (int oc = 0; oc < os.channels; ++oc) {
      double* dst_plane = out + static_cast<std::size_t>(oc) * plane;
      for (int kh = 0; kh < k; ++kh) {
        for (int kw = 0; kw < k; ++kw) {
          const double wv = w[((ic * os.channels + oc) * k + kh) * k + kw];
          for (int ih = 0; ih < is.height; ++ih) {
            const double* src = src_plane + ih * is.width;
            double* dst = dst_plane + (ih + kh) * os.width + kw;
#pragma omp simd
            for (int iw = 0; iw < is.width; ++iw) dst[iw] += wv * src[iw];
          }
        }
      }
    }
  }
}

void conv_transpose_backward(const double* in, Shape3 is, const double* w,
                             const double* g, Shape3 os, int k, double* dw,
                             double* db, double* din) {
  const int plane = os.height * os.width;
  if (db != nullptr) {
    for (int oc = 0; oc < os.channels; ++oc) {
      const double* g_plane = g + static_cast<std::size_t>(oc) * plane;
      double acc = 0.0;
#pragma omp simd reduction(+ : acc)
      for (int n = 0; n < plane; ++n) acc += g_plane[n];
      db[oc] += acc;
    }
  }
  for (int ic = 0; ic < is.channels; ++ic) {
    const double* in_plane =
        in + static_cast<std::size_t>(ic) * is.height * is.width;
    double* din_plane =
        din ? din + static_cast<std::size_t>(ic) * is.height * is.width
            : nullptr;
    for (int oc = 0; oc < os.channels; ++oc) {
      const double* g_plane = g + static_cast<std::size_t>(oc) * plane;
      for (int kh = 0; kh < k; ++kh) {
        for (int kw = 0; kw < k; ++kw) {
          const int widx = ((ic * os.channels + oc) * k + kh) * k + kw;
          if (dw != nullptr) {
            double acc = 0.0;
            for (int ih = 0; ih < is.height; ++ih) {
              const double* src = in_plane + ih * is.width;
              const double* gr = g_plane + (ih + kh) * os.width + kw;
#pragma omp simd reduction(+ : acc)
              for (int iw = 0; iw < is.width; ++iw) acc += src[iw] * gr[iw];
            }
            dw[widx] += acc;
          }
          if (din_plane != nullptr) {
            const double wv = w[widx];
            for (int ih = 0; ih < is.height; ++ih) {
              double* dst = din_plane + ih * is.width;
              const double* gr = g_plane + (ih + kh) * os.width + kw;
#pragma omp simd
              for (int iw = 0; iw < is.width; ++iw) dst[iw] += wv * gr[iw];
            }
          }
        }
      }
    }
  }
}

// 2x2 window, stride 2. Ties resolve to the first maximum in scan order.
void maxpool_forward(const double* in, Shape3 is, Shape3 os, double* out,
                     std::uint32_t* idx) {
  for (int c = 0; c < os.channels; ++c) {
    const std::size_t base = static_cast<std::size_t>(c) * is.height * is.width;
    for (int i = 0; i < os.height; ++i) {
      for (int j = 0; j < os.width; ++j) {
        std::size_t best = base + static_cast<std::size_t>(2 * i) * is.width +
                           2 * j;
        for (int a = 0; a < 2; ++a) {
          for (int b = 0; b < 2; ++b) {
            const std::size_t pos = base +
                                    static_cast<std::size_t>(2 * i + a) *
                                        is.width +
                                    2 * j + b;
            if (in[pos] > in[best]) best = pos;
          }
        }
        const std::size_t o =
            (static_cast<std::size_t>(c) * os.height + i) * os.width + j;
        out[o] = in[best];
        idx[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
}

void dense_forward(const double* in, int rows, int features, const double* w,
                   const double* b, double* out) {
  for (int r = 0; r < rows; ++r) {
    const double* x = in + static_cast<std::size_t>(r) * features;
    double* y = out + static_cast<std::size_t>(r) * features;
    for (int j = 0; j < features; ++j) {
      const double* wr = w + static_cast<std::size_t>(j) * features;
      double acc = b[j];
      for (int kk = 0; kk < features; ++kk) acc += wr[kk] * x[kk];
      y[j] = acc;
    }
  }
}

void dense_backward(const double* in, int rows, int features, const double* w,
                    const double* g, double* dw, double* db, double* din) {
  for (int r = 0; r < rows; ++r) {
    const double* x = in + static_cast<std::size_t>(r) * features;
    const double* gr = g + static_cast<std::size_t>(r) * features;
    for (int j = 0; j < features; ++j) {
      const double gj = gr[j];
      if (gj == 0.0) continue;
      if (dw != nullptr) {
        double* dwr = dw + static_cast<std::size_t>(j) * features;
        for (int kk = 0; kk < features; ++kk) dwr[kk] += gj * x[kk];
      }
      if (db != nullptr) db[j] += gj;
      if (din != nullptr) {
        const double* wr = w + static_cast<std::size_t>(j) * features;
        double* dx = din + static_cast<std::size_t>(r) * features;
        for (int kk = 0; kk < features; ++kk) dx[kk] += wr[kk] * gj;
      }
    }
  }
}

void apply_activation(Activation act, std::vector<double>& v) {
  switch (act) {
    case Activation::relu:
      for (double& x : v) x = x > 0.0 ? x : 0.0;
      break;
    case Activation::sigmoid:
      for (double& x : v) x = 1.0 / (1.0 + std::exp(-x));
      break;
    case Activation::none:
      break;
  }
}

// Turns d(loss)/d(output) into d(loss)/d(pre-activation) in place.
void activation_backward(Activation act, const std::vector<double>& out,
                         std::vector<double>& g) {
  switch (act) {
    case Activation::relu:
      for (std::size_t n = 0; n < g.size(); ++n) {
        if (!(out[n] > 0.0)) g[n] = 0.0;
      }
      break;
    case Activation::sigmoid:
      for (std::size_t n = 0; n < g.size(); ++n) {
        g[n] *= out[n] * (1.0 - out[n]);
      }
      break;
    case Activation::none:
      break;
  }
}

std::vector<LayerSpec> make_layers() {
  using K = LayerKind;
  using A = Activation;
  return {
      {K::conv2d, 1, 6, 5, 5, 1, A::relu},
      {K::maxpool, 6, 6, 2, 2, 2, A::none},
      {K::conv2d, 6, 16, 5, 5, 1, A::relu},
      {K::maxpool, 16, 16, 2, 2, 2, A::none},
      {K::dense, 29, 29, 1, 1, 1, A::relu},
      {K::maxunpool, 16, 16, 2, 2, 2, A::none},
      {K::conv_transpose2d, 16, 6, 5, 5, 1, A::relu},
      {K::maxunpool, 6, 6, 2, 2, 2, A::none},
      {K::conv_transpose2d, 6, 1, 5, 5, 1, A::sigmoid},
  };
}

std::vector<Shape3> make_shapes() {
  std::vector<Shape3> shapes;
  Shape3 s{1, kInputSize, kInputSize};
  std::vector<Shape3> pool_inputs(autoencoder_layers().size());
  int l = 0;
  for (const LayerSpec& spec : autoencoder_layers()) {
    switch (spec.kind) {
      case LayerKind::conv2d:
        s = {spec.out_channels, s.height - spec.kernel_h + 1,
             s.width - spec.kernel_w + 1};
        break;
      case LayerKind::maxpool:
        pool_inputs[l] = s;
        s = {s.channels, s.height / spec.stride, s.width / spec.stride};
        break;
      case LayerKind::dense:
        s = {s.channels, s.height, spec.out_channels};
        break;
      case LayerKind::maxunpool:
        s = pool_inputs[paired_pool(l)];
        break;
      case LayerKind::conv_transpose2d:
        s = {spec.out_channels, s.height + spec.kernel_h - 1,
             s.width + spec.kernel_w - 1};
        break;
    }
    shapes.push_back(s);
    ++l;
  }
  return shapes;
}

Shape3 input_shape(int layer) {
  return layer == 0 ? Shape3{1, kInputSize, kInputSize}
                    : autoencoder_shapes()[layer - 1];
}

void check_cache(const AutoencoderModel& model, const ForwardCache& cache) {
  if (cache.model_version != model.version() ||
      cache.activations.size() != autoencoder_layers().size() + 1) {
    throw StaleCacheError(
        "forward cache does not match the current model parameters");
  }
}

void check_input(const Matrix& x) {
  if (x.rows != static_cast<std::size_t>(kInputSize) ||
      x.cols != static_cast<std::size_t>(kInputSize)) {
    throw ShapeError("autoencoder input must be 128x128, got " +
                     std::to_string(x.rows) + "x" + std::to_string(x.cols));
  }
}

}  // namespace

// ---- layer metadata ---------------------------------------------------------

std::size_t LayerSpec::weight_count() const {
  switch (kind) {
    case LayerKind::conv2d:
    case LayerKind::conv_transpose2d:
      return static_cast<std::size_t>(in_channels) * out_channels * kernel_h *
             kernel_w;
    case LayerKind::dense:
      return static_cast<std::size_t>(in_channels) * out_channels;
    default:
      return 0;
  }
}

std::size_t LayerSpec::bias_count() const {
  switch (kind) {
    case LayerKind::conv2d:
    case LayerKind::conv_transpose2d:
    case LayerKind::dense:
      return static_cast<std::size_t>(out_channels);
    default:
      return 0;
  }
}

std::size_t LayerSpec::fan_in() const {
  switch (kind) {
    case LayerKind::conv2d:
    case LayerKind::conv_transpose2d:
      return static_cast<std::size_t>(in_channels) * kernel_h * kernel_w;
    case LayerKind::dense:
      return static_cast<std::size_t>(in_channels);
    default:
      return 0;
  }
}

const std::vector<LayerSpec>& autoencoder_layers() {
  static const std::vector<LayerSpec> layers = make_layers();
  return layers;
}

const std::vector<Shape3>& autoencoder_shapes() {
  static const std::vector<Shape3> shapes = make_shapes();
  return shapes;
}

std::string layer_name(int layer) {
  static const char* names[] = {"conv1",   "pool2",  "conv3",
                                "pool4",   "dense5", "unpool6",
                                "convT7",  "unpool8", "convT9"};
  if (layer < 0 || layer >= 9) return "layer" + std::to_string(layer);
  return names[layer];
}

// ---- model ------------------------------------------------------------------

AutoencoderModel::AutoencoderModel(std::uint64_t seed) : seed_(seed) {
  const auto& layers = autoencoder_layers();
  std::size_t offset = 0;
  for (const LayerSpec& spec : layers) {
    offsets_.push_back(offset);
    offset += spec.param_count();
  }
  params_.resize(offset);
  Rng rng(derive_seed(seed, kInitStream));
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (layers[l].param_count() == 0) continue;
    const double bound = 1.0 / std::sqrt(static_cast<double>(layers[l].fan_in()));
    for (std::size_t n = 0; n < layers[l].param_count(); ++n) {
      params_[offsets_[l] + n] = rng.uniform(-bound, bound);
    }
  }
  mask_.assign(params_.size(), 1);
  rebuild_masked_index();
  version_ = next_version();
}

AutoencoderModel build_autoencoder(std::uint64_t seed) {
  return AutoencoderModel(seed);
}

void AutoencoderModel::touch() { version_ = next_version(); }

void AutoencoderModel::set_params(std::span<const double> values) {
  if (values.size() != params_.size()) {
    throw ShapeError("expected " + std::to_string(params_.size()) +
                     " parameters, got " + std::to_string(values.size()));
  }
  std::copy(values.begin(), values.end(), params_.begin());
  touch();
}

void AutoencoderModel::rebuild_masked_index() {
  masked_.clear();
  for (std::size_t i = 0; i < mask_.size(); ++i) {
    if (mask_[i]) masked_.push_back(i);
  }
}

void AutoencoderModel::freeze_except_bottleneck() {
  mask_.assign(params_.size(), 0);
  const std::size_t begin = offsets_[kBottleneckLayer];
  const std::size_t count = autoencoder_layers()[kBottleneckLayer].weight_count();
  std::fill(mask_.begin() + static_cast<std::ptrdiff_t>(begin),
            mask_.begin() + static_cast<std::ptrdiff_t>(begin + count), 1);
  rebuild_masked_index();
}

void AutoencoderModel::set_trainable_mask(std::span<const std::uint8_t> mask) {
  if (mask.size() != params_.size()) {
    throw ShapeError("mask has " + std::to_string(mask.size()) + " entries, expected " +
                     std::to_string(params_.size()));
  }
  for (std::size_t i = 0; i < mask.size(); ++i) mask_[i] = mask[i] ? 1 : 0;
  rebuild_masked_index();
}

void AutoencoderModel::unfreeze_all() {
  mask_.assign(params_.size(), 1);
  rebuild_masked_index();
}

void AutoencoderModel::reinit_trainable(std::uint64_t seed) {
  const auto& layers = autoencoder_layers();
  Rng rng(derive_seed(seed, kInitStream, 1));
  std::size_t layer = 0;
  for (std::size_t i : masked_) {
    while (layer + 1 < layers.size() && i >= offsets_[layer + 1]) ++layer;
    const double bound =
        1.0 / std::sqrt(static_cast<double>(layers[layer].fan_in()));
    params_[i] = rng.uniform(-bound, bound);
  }
  touch();
}

ParamVector AutoencoderModel::extract_masked() const {
  std::vector<double> out;
  out.reserve(masked_.size());
  for (std::size_t i : masked_) out.push_back(params_[i]);
  return ParamVector(std::move(out));
}

void AutoencoderModel::set_masked(const ParamVector& values) {
  if (values.size() != masked_.size()) {
    throw ShapeError("masked parameter vector has length " +
                     std::to_string(values.size()) + ", expected " +
                     std::to_string(masked_.size()));
  }
  for (std::size_t n = 0; n < masked_.size(); ++n) params_[masked_[n]] = values[n];
  touch();
}

void AutoencoderModel::apply_delta(const ParamVector& delta) {
  if (delta.size() != masked_.size()) {
    throw ShapeError("delta has length " + std::to_string(delta.size()) +
                     ", expected " + std::to_string(masked_.size()));
  }
  for (std::size_t n = 0; n < masked_.size(); ++n) params_[masked_[n]] += delta[n];
  touch();
}

// ---- forward / backward -----------------------------------------------------

namespace {

std::uint64_t prefix_fingerprint(const AutoencoderModel& model, int upto) {
  const std::size_t end = model.layer_offset(upto);
  std::uint64_t h = 0x9E3779B97F4A7C15ull ^ end;
  for (std::size_t i = 0; i < end; ++i) {
    std::uint64_t bits = 0;
    const double v = model.params()[i];
    std::memcpy(&bits, &v, sizeof bits);
    std::uint64_t state = h ^ bits;
    h = splitmix64(state);
  }
  return h;
}

// Runs layers [start, end) on a cache whose activations[0..start] are set.
void run_layers(const AutoencoderModel& model, ForwardCache& cache, int start,
                int end) {
  const auto& layers = autoencoder_layers();
  const auto& shapes = autoencoder_shapes();
  const double* p = model.params().data();
  for (int l = start; l < end; ++l) {
    const LayerSpec& spec = layers[l];
    const Shape3 is = input_shape(l);
    const Shape3 os = shapes[l];
    const std::vector<double>& in = cache.activations[l];
    std::vector<double>& out = cache.activations[l + 1];
    out.assign(os.size(), 0.0);
    const double* w = p + model.layer_offset(l);
    const double* b = w + spec.weight_count();
    switch (spec.kind) {
      case LayerKind::conv2d:
        conv2d_forward(in.data(), is, w, b, os, spec.kernel_h, out.data());
        break;
      case LayerKind::maxpool:
        cache.pool_indices[l].resize(os.size());
        maxpool_forward(in.data(), is, os, out.data(),
                        cache.pool_indices[l].data());
        break;
      case LayerKind::dense:
        dense_forward(in.data(), is.channels * is.height, is.width, w, b,
                      out.data());
        break;
      case LayerKind::maxunpool: {
        const auto& idx = cache.pool_indices[paired_pool(l)];
        for (std::size_t n = 0; n < idx.size(); ++n) out[idx[n]] = in[n];
        break;
      }
      case LayerKind::conv_transpose2d:
        conv_transpose_forward(in.data(), is, w, b, os, spec.kernel_h,
                               out.data());
        break;
    }
    apply_activation(spec.activation, out);
  }
}

ForwardCache empty_cache(const Matrix& x) {
  ForwardCache cache;
  const std::size_t n = autoencoder_layers().size();
  cache.activations.resize(n + 1);
  cache.pool_indices.resize(n);
  cache.activations[0] = x.data;
  return cache;
}

}  // namespace

ForwardResult forward(const AutoencoderModel& model, const Matrix& x) {
  check_input(x);
  ForwardResult result;
  result.cache = empty_cache(x);
  result.cache.model_version = model.version();
  run_layers(model, result.cache, 0, static_cast<int>(autoencoder_layers().size()));
  result.reconstruction = Matrix(kInputSize, kInputSize);
  result.reconstruction.data = result.cache.activations.back();
  return result;
}

FrozenPrefix compute_prefix(const AutoencoderModel& model, const Matrix& x,
                            int upto_layer) {
  check_input(x);
  const int n = static_cast<int>(autoencoder_layers().size());
  if (upto_layer < 0 || upto_layer >= n) {
    throw InvalidArgument("prefix layer out of range");
  }
  FrozenPrefix prefix;
  prefix.upto_layer = upto_layer;
  prefix.fingerprint = prefix_fingerprint(model, upto_layer);
  prefix.cache = empty_cache(x);
  run_layers(model, prefix.cache, 0, upto_layer);
  // Only the prefix output and the pooling indices are needed downstream.
  for (int l = 0; l < upto_layer; ++l) {
    prefix.cache.activations[l].clear();
    prefix.cache.activations[l].shrink_to_fit();
  }
  return prefix;
}

ForwardResult forward_from(const AutoencoderModel& model, const FrozenPrefix& prefix) {
  if (prefix.fingerprint != prefix_fingerprint(model, prefix.upto_layer)) {
    throw StaleCacheError("frozen prefix no longer matches the model's leading layers");
  }
  const int n = static_cast<int>(autoencoder_layers().size());
  ForwardResult result;
  ForwardCache& cache = result.cache;
  cache.activations.resize(n + 1);
  cache.pool_indices = prefix.cache.pool_indices;
  for (int l = 0; l <= prefix.upto_layer; ++l) {
    cache.activations[l] = prefix.cache.activations[l];
  }
  cache.model_version = model.version();
  run_layers(model, cache, prefix.upto_layer, n);
  result.reconstruction = Matrix(kInputSize, kInputSize);
  result.reconstruction.data = cache.activations.back();
  return result;
}

double mse_loss(const Matrix& y, const Matrix& y_hat) {
  if (y.rows != y_hat.rows || y.cols != y_hat.cols) {
    throw ShapeError("mse_loss operands differ in shape");
  }
  if (y.size() == 0) throw ShapeError("mse_loss on empty matrices");
  double acc = 0.0;
  for (std::size_t n = 0; n < y.size(); ++n) {
    const double d = y.data[n] - y_hat.data[n];
    acc += d * d;
  }
  return acc / static_cast<double>(y.size());
}

namespace {

bool layer_has_trainable(const AutoencoderModel& model, int layer) {
  const std::size_t begin = model.layer_offset(layer);
  const std::size_t end = begin + autoencoder_layers()[layer].param_count();
  const auto& mask = model.trainable_mask();
  for (std::size_t i = begin; i < end; ++i) {
    if (mask[i]) return true;
  }
  return false;
}

// With trainable_only, weight gradients of fully frozen layers are skipped
// (left zero); input gradients still flow through them.
void gradient_impl(const AutoencoderModel& model, const ForwardCache& cache,
                   const Matrix& y, int lowest_layer, bool trainable_only,
                   std::vector<double>& grad) {
  check_cache(model, cache);
  check_input(y);
  const auto& layers = autoencoder_layers();
  const auto& shapes = autoencoder_shapes();
  const double* p = model.params().data();
  grad.assign(model.param_count(), 0.0);

  // d loss / d reconstruction
  const std::vector<double>& out = cache.activations.back();
  std::vector<double> g(out.size());
  const double scale = 2.0 / static_cast<double>(out.size());
  for (std::size_t n = 0; n < out.size(); ++n) g[n] = scale * (out[n] - y.data[n]);

  for (int l = static_cast<int>(layers.size()) - 1; l >= lowest_layer; --l) {
    const LayerSpec& spec = layers[l];
    const Shape3 is = input_shape(l);
    const Shape3 os = shapes[l];
    activation_backward(spec.activation, cache.activations[l + 1], g);
    const bool need_input_grad = l > lowest_layer;
    std::vector<double> gin;
    if (need_input_grad) gin.assign(is.size(), 0.0);
    const std::vector<double>& in = cache.activations[l];
    const std::size_t off = model.layer_offset(l);
    const double* w = p + off;
    double* dw = grad.data() + off;
    double* db = dw + spec.weight_count();
    if (trainable_only && !layer_has_trainable(model, l)) {
      dw = nullptr;
      db = nullptr;
    }
    switch (spec.kind) {
      case LayerKind::conv2d:
        conv2d_backward(in.data(), is, w, g.data(), os, spec.kernel_h, dw, db,
                        need_input_grad ? gin.data() : nullptr);
        break;
      case LayerKind::maxpool:
        if (need_input_grad) {
          const auto& idx = cache.pool_indices[l];
          for (std::size_t n = 0; n < idx.size(); ++n) gin[idx[n]] += g[n];
        }
        break;
      case LayerKind::dense:
        dense_backward(in.data(), is.channels * is.height, is.width, w,
                       g.data(), dw, db, need_input_grad ? gin.data() : nullptr);
        break;
      case LayerKind::maxunpool:
        if (need_input_grad) {
          const auto& idx = cache.pool_indices[paired_pool(l)];
          for (std::size_t n = 0; n < idx.size(); ++n) gin[n] = g[idx[n]];
        }
        break;
      case LayerKind::conv_transpose2d:
        conv_transpose_backward(in.data(), is, w, g.data(), os, spec.kernel_h,
                                dw, db, need_input_grad ? gin.data() : nullptr);
        break;
    }
    if (need_input_grad) g = std::move(gin);
  }
}

}  // namespace

void gradient_from(const AutoencoderModel& model, const ForwardCache& cache,
                   const Matrix& y, int lowest_layer, std::vector<double>& grad) {
  gradient_impl(model, cache, y, lowest_layer, false, grad);
}

ParamVector backward(const AutoencoderModel& model, const ForwardCache& cache,
                     const Matrix& y) {
  std::vector<double> grad;
  gradient_from(model, cache, y, 0, grad);
  return ParamVector(std::move(grad));
}

namespace {

ParamVector sgd_epoch_impl(AutoencoderModel& model,
                           std::span<const FeatureSegment> data,
                           std::span<const FrozenPrefix> prefixes, double lr,
                           bool mask_only) {
  if (data.empty()) throw InvalidArgument("sgd_epoch needs at least one segment");
  if (!(lr >= 0.0)) throw InvalidArgument("learning rate must be >= 0");
  if (!prefixes.empty() && prefixes.size() != data.size()) {
    throw ShapeError("one frozen prefix per segment expected");
  }

  const auto& masked = model.masked_indices();
  if (mask_only && masked.empty()) {
    throw InvalidArgument("mask_only training with an empty trainable mask");
  }
  // Backpropagation only has to reach the lowest layer that gets updated.
  const int lowest = mask_only ? lowest_trainable_layer(model) : 0;
  for (const FrozenPrefix& p : prefixes) {
    if (p.upto_layer > lowest) {
      throw InvalidArgument("frozen prefix covers a trainable layer");
    }
  }

  const std::vector<double> before(model.params().begin(), model.params().end());
  std::vector<double> grad;
  for (std::size_t k = 0; k < data.size(); ++k) {
    const FeatureSegment& seg = data[k];
    const ForwardResult fwd = prefixes.empty() ? forward(model, seg.values)
                                               : forward_from(model, prefixes[k]);
    gradient_impl(model, fwd.cache, seg.values, lowest, mask_only, grad);
    std::vector<double>& params = model.mutable_params();
    if (mask_only) {
      for (std::size_t i : masked) params[i] -= lr * grad[i];
    } else {
      for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grad[i];
    }
    model.touch();
  }

  const auto after = model.params();
  std::vector<double> delta;
  if (mask_only) {
    delta.reserve(masked.size());
    for (std::size_t i : masked) delta.push_back(after[i] - before[i]);
  } else {
    delta.resize(after.size());
    for (std::size_t i = 0; i < after.size(); ++i) delta[i] = after[i] - before[i];
  }
  return ParamVector(std::move(delta));
}

}  // namespace

int lowest_trainable_layer(const AutoencoderModel& model) {
  const auto& masked = model.masked_indices();
  if (masked.empty()) throw InvalidArgument("model has no trainable parameters");
  int lowest = static_cast<int>(autoencoder_layers().size()) - 1;
  while (lowest > 0 && model.layer_offset(lowest) > masked.front()) --lowest;
  return lowest;
}

ParamVector sgd_epoch(AutoencoderModel& model,
                      std::span<const FeatureSegment> data, double lr,
                      bool mask_only) {
  return sgd_epoch_impl(model, data, {}, lr, mask_only);
}

ParamVector sgd_epoch(AutoencoderModel& model,
                      std::span<const FeatureSegment> data,
                      std::span<const FrozenPrefix> prefixes, double lr) {
  if (prefixes.size() != data.size()) {
    throw ShapeError("one frozen prefix per segment expected");
  }
  return sgd_epoch_impl(model, data, prefixes, lr, true);
}

std::vector<double> pretrain(AutoencoderModel& model,
                             std::span<const FeatureSegment> data, int epochs,
                             double lr) {
  if (data.empty()) throw InvalidArgument("pretraining dataset is empty");
  if (epochs < 0) throw InvalidArgument("epochs must be >= 0");
  std::vector<double> trace;
  std::vector<double> grad;
  for (int epoch = 1; epoch <= epochs; ++epoch) {
    double total = 0.0;
    for (const FeatureSegment& seg : data) {
      const ForwardResult fwd = forward(model, seg.values);
      const double loss = mse_loss(seg.values, fwd.reconstruction);
      if (!std::isfinite(loss)) throw DivergenceError(epoch, loss);
      total += loss;
      gradient_from(model, fwd.cache, seg.values, 0, grad);
      std::vector<double>& params = model.mutable_params();
      for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grad[i];
      model.touch();
    }
    const double mean = total / static_cast<double>(data.size());
    bool finite_params = true;
    for (double v : model.params()) finite_params &= std::isfinite(v);
    if (!std::isfinite(mean) || !finite_params) throw DivergenceError(epoch, mean);
    trace.push_back(mean);
  }
  return trace;
}

}  // namespace asncfl::nn
