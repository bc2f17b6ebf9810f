#pragma once

// Light-weight convolutional autoencoder used as the shared model in
// clustered federated learning.
//
//   layer  operator         output shape
//   conv1  conv 5x5, ReLU   6 x 124 x 124
//   pool2  maxpool 2x2      6 x 62 x 62
//   conv3  conv 5x5, ReLU   16 x 58 x 58
//   pool4  maxpool 2x2      16 x 29 x 29
//   dense5 dense 29, ReLU   16 x 29 x 29   (29x29 map over the last axis)
//   unpool6 (pool4 indices) 16 x 58 x 58
//   convT7 5x5, ReLU        6 x 62 x 62
//   unpool8 (pool2 indices) 6 x 124 x 124
//   convT9 5x5, sigmoid     1 x 128 x 128
//
// Parameters live in one flat vector in canonical order: layer by layer,
// weights first then biases. Convolution weights are [out][in][kh][kw],
// transposed-convolution weights [in][out][kh][kw], dense weights
// [out][in].

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "asncfl/matrix.hpp"
#include "asncfl/vecspace.hpp"

namespace asncfl::nn {

enum class LayerKind : std::uint8_t {
  conv2d = 0,
  maxpool = 1,
  dense = 2,
  maxunpool = 3,
  conv_transpose2d = 4,
};

enum class Activation : std::uint8_t { none = 0, relu = 1, sigmoid = 2 };

struct Shape3 {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::size_t size() const {
    return static_cast<std::size_t>(channels) * height * width;
  }
  friend bool operator==(const Shape3&, const Shape3&) = default;
};

struct LayerSpec {
  LayerKind kind;
  int in_channels;
  int out_channels;
  int kernel_h;
  int kernel_w;
  int stride;
  Activation activation;

  std::size_t weight_count() const;
  std::size_t bias_count() const;
  std::size_t param_count() const { return weight_count() + bias_count(); }
  std::size_t fan_in() const;
};

inline constexpr int kInputSize = 128;
inline constexpr std::size_t kTotalParams = 5999;
inline constexpr std::size_t kBottleneckWeights = 841;
inline constexpr int kBottleneckLayer = 4;

const std::vector<LayerSpec>& autoencoder_layers();
// Output shape of every layer for a 128x128 input.
const std::vector<Shape3>& autoencoder_shapes();
std::string layer_name(int layer);

// One normalized LMBE segment: 128 mel bands (rows) x 128 frames (cols),
// entries in [0, 1].
struct FeatureSegment {
  Matrix values;
  int node_id = -1;
  int segment_index = 0;
};

class AutoencoderModel;

struct ForwardCache {
  // activations[0] is the input; activations[l + 1] the output of layer l.
  std::vector<std::vector<double>> activations;
  // Argmax positions (flat index into the pooled input) of maxpool layers;
  // empty for other layers.
  std::vector<std::vector<std::uint32_t>> pool_indices;
  std::uint64_t model_version = 0;
};

// Activations of the leading layers [0, upto_layer), which stay fixed while
// those layers are frozen. The fingerprint covers their parameters.
struct FrozenPrefix {
  int upto_layer = 0;
  std::uint64_t fingerprint = 0;
  ForwardCache cache;
};

struct ForwardResult {
  Matrix reconstruction;
  ForwardCache cache;
};

class AutoencoderModel {
 public:
  // Uniform(+-1/sqrt(fan_in)) initialization of weights and biases,
  // deterministic per seed. All parameters start trainable.
  explicit AutoencoderModel(std::uint64_t seed);

  const std::vector<LayerSpec>& layers() const { return autoencoder_layers(); }
  std::uint64_t seed() const { return seed_; }

  std::size_t param_count() const { return params_.size(); }
  std::span<const double> params() const { return params_; }
  void set_params(std::span<const double> values);
  // Offset of a layer's first parameter in the flat vector.
  std::size_t layer_offset(int layer) const { return offsets_[layer]; }

  const std::vector<std::uint8_t>& trainable_mask() const { return mask_; }
  std::size_t masked_count() const { return masked_.size(); }
  const std::vector<std::size_t>& masked_indices() const { return masked_; }

  // Freeze everything except the bottleneck's 29x29 weight block.
  void freeze_except_bottleneck();
  void unfreeze_all();
  void set_trainable_mask(std::span<const std::uint8_t> mask);
  // Redraws only the trainable parameters from the init scheme.
  void reinit_trainable(std::uint64_t seed);

  // Trainable parameters in ascending flat-index order.
  ParamVector extract_masked() const;
  void set_masked(const ParamVector& values);
  void apply_delta(const ParamVector& delta);

  // Bumped on every parameter mutation; a ForwardCache is only valid for
  // the version it was produced with.
  std::uint64_t version() const { return version_; }

  // Raw in-place access for the optimizer.
  std::vector<double>& mutable_params() { return params_; }
  void touch();

 private:
  std::uint64_t seed_;
  std::vector<double> params_;
  std::vector<std::size_t> offsets_;
  std::vector<std::uint8_t> mask_;
  std::vector<std::size_t> masked_;
  std::uint64_t version_ = 0;

  void rebuild_masked_index();
};

AutoencoderModel build_autoencoder(std::uint64_t seed);

ForwardResult forward(const AutoencoderModel& model, const Matrix& x);

FrozenPrefix compute_prefix(const AutoencoderModel& model, const Matrix& x,
                            int upto_layer);

// Same result as forward() on the prefix's input, computing only the layers
// from prefix.upto_layer on. Throws StaleCacheError if the leading layers
// changed since the prefix was computed.
ForwardResult forward_from(const AutoencoderModel& model, const FrozenPrefix& prefix);

// Index of the first layer holding a trainable parameter.
int lowest_trainable_layer(const AutoencoderModel& model);

// (1/N) sum (y - y_hat)^2
double mse_loss(const Matrix& y, const Matrix& y_hat);

// Gradient of mse_loss(y, forward(x)) w.r.t. every parameter.
ParamVector backward(const AutoencoderModel& model, const ForwardCache& cache,
                     const Matrix& y);

// Gradient restricted to layers >= lowest_layer (earlier entries left zero)
// and backpropagation stopped there. Written into grad (size param_count).
void gradient_from(const AutoencoderModel& model, const ForwardCache& cache,
                   const Matrix& y, int lowest_layer, std::vector<double>& grad);

// One pass of per-sample SGD in stored order. With mask_only the update is
// restricted to the trainable mask and the returned delta covers only the
// masked entries; otherwise all parameters move and the delta is full.
ParamVector sgd_epoch(AutoencoderModel& model,
                      std::span<const FeatureSegment> data, double lr,
                      bool mask_only);

// mask_only variant that starts each forward pass from a frozen prefix.
ParamVector sgd_epoch(AutoencoderModel& model,
                      std::span<const FeatureSegment> data,
                      std::span<const FrozenPrefix> prefixes, double lr);

// Full-parameter SGD; returns the mean per-sample loss of every epoch.
std::vector<double> pretrain(AutoencoderModel& model,
                             std::span<const FeatureSegment> data, int epochs,
                             double lr);

}  // namespace asncfl::nn
