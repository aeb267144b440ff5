#pragma once

// Small convolutional encoder with exact reverse-mode gradients.
//
// Backbone: 3x3 stride-2 convolutions (padding 1) with ReLU, then a global
// average pool ("pooled" features, the probe tap point). Head: two dense
// layers with a ReLU between them, followed by L2 normalization. No batch
// statistics anywhere, so every sample is processed independently and the
// result for a sample does not depend on what else is in the batch.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stcl/rng.hpp"

namespace stcl::nn {

struct EncoderArch {
  int input_size = 64;
  int in_channels = 3;
  std::vector<int> conv_channels{16, 32, 64, 128};
  int hidden_dim = 128;
  int feat_dim = 64;

  void validate() const;
  int pooled_dim() const { return conv_channels.back(); }
  std::size_t input_len() const {
    return static_cast<std::size_t>(in_channels) * input_size * input_size;
  }
  /// Spatial side after conv layer `layer`.
  int output_side(std::size_t layer) const;

  nlohmann::json to_json() const;
  static EncoderArch from_json(const nlohmann::json& j);
  bool operator==(const EncoderArch&) const = default;
};

struct TensorInfo {
  std::string name;
  std::vector<std::size_t> shape;
  std::size_t offset = 0;
  std::size_t size = 0;
};

/// All parameters of one encoder in a single flat buffer. The tensor order is
/// fixed by the architecture: conv{i}.weight [out, in, 3, 3], conv{i}.bias,
/// head.fc1.weight [hidden, pooled], head.fc1.bias, head.fc2.weight
/// [feat, hidden], head.fc2.bias.
template <class T>
class ParamSet {
 public:
  ParamSet() = default;
  explicit ParamSet(const EncoderArch& arch);

  const EncoderArch& arch() const { return arch_; }
  const std::vector<TensorInfo>& tensors() const { return layout_; }

  std::span<T> flat() { return data_; }
  std::span<const T> flat() const { return data_; }
  std::span<T> tensor(std::size_t i) { return {data_.data() + layout_[i].offset, layout_[i].size}; }
  std::span<const T> tensor(std::size_t i) const { return {data_.data() + layout_[i].offset, layout_[i].size}; }
  std::size_t index_of(const std::string& name) const;

  std::size_t conv_weight(std::size_t layer) const { return 2 * layer; }
  std::size_t conv_bias(std::size_t layer) const { return 2 * layer + 1; }
  std::size_t fc1_weight() const { return 2 * arch_.conv_channels.size(); }
  std::size_t fc1_bias() const { return fc1_weight() + 1; }
  std::size_t fc2_weight() const { return fc1_weight() + 2; }
  std::size_t fc2_bias() const { return fc1_weight() + 3; }

  /// He-normal weights, zero biases.
  void init(Rng& rng);
  void fill(T value);

  template <class U>
  ParamSet<U> cast() const {
    ParamSet<U> out(arch_);
    for (std::size_t i = 0; i < data_.size(); ++i) out.flat()[i] = static_cast<U>(data_[i]);
    return out;
  }

  /// FNV-1a over the raw bytes; identity check for "parameters untouched".
  std::uint64_t checksum() const;

  bool operator==(const ParamSet& o) const { return arch_ == o.arch_ && data_ == o.data_; }

 private:
  EncoderArch arch_;
  std::vector<TensorInfo> layout_;
  std::vector<T> data_;
};

/// Saved activations for backward.
template <class T>
struct Tape {
  struct ConvSample {
    std::vector<T> col;  // [in*9, P] im2col of the layer input
    std::vector<T> pre;  // [out, P] pre-activation
  };
  std::size_t batch = 0;
  std::vector<std::vector<ConvSample>> conv;  // [sample][layer]
  std::vector<T> pooled;                      // [B, pooled]
  std::vector<T> h1_pre;                      // [B, hidden]
  std::vector<T> h1;                          // [B, hidden]
  std::vector<T> z_norm;                      // [B] ||z||
  std::vector<T> normalized;                  // [B, feat]
};

template <class T>
struct ForwardResult {
  std::size_t batch = 0;
  std::vector<T> pooled;      // [B, pooled_dim]
  std::vector<T> normalized;  // [B, feat_dim], unit rows
  std::optional<Tape<T>> tape;
};

/// `inputs` holds B channel-major images of arch.input_len() values each.
/// Throws NumericError naming the first layer that produced NaN/Inf.
template <class T>
ForwardResult<T> forward(const ParamSet<T>& params, std::span<const T> inputs, bool keep_tape);

/// Pooled backbone features only (the head is skipped).
template <class T>
std::vector<T> pooled_features(const ParamSet<T>& params, std::span<const T> inputs);

/// Gradients of a scalar loss with respect to all parameters, given
/// d loss / d normalized [B, feat_dim]. Contributions are summed over the batch.
template <class T>
ParamSet<T> backward(const ParamSet<T>& params, const Tape<T>& tape, std::span<const T> grad_normalized);

/// v = momentum * v + g; theta -= lr * v (fused). Throws NumericError on
/// non-finite gradients and ConfigError on invalid hyperparameters.
template <class T>
void sgd_step(ParamSet<T>& params, const ParamSet<T>& grads, T lr, T momentum, ParamSet<T>& velocity);

/// theta_k = m * theta_k + (1 - m) * theta_q, evaluated as
/// fma(1 - m, theta_q, m * theta_k) per element.
template <class T>
void momentum_update(ParamSet<T>& theta_k, const ParamSet<T>& theta_q, T m);

// ---- checkpoint files ----------------------------------------------------
//
// Layout: "STCLCKPT" magic, uint32 little-endian header length, a JSON header
// {arch, dtype, endianness, tensors:[{name, shape}], meta}, then each tensor's
// raw little-endian payload in header order.

struct NamedTensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<float> values;
};

void write_tensor_file(const std::string& path, const EncoderArch& arch, const std::vector<NamedTensor>& tensors,
                       const nlohmann::json& meta);

struct TensorFile {
  EncoderArch arch;
  std::vector<NamedTensor> tensors;
  nlohmann::json meta;

  const NamedTensor& get(const std::string& name) const;
};

TensorFile read_tensor_file(const std::string& path);

/// Tensors of `params`, each name prefixed with `prefix`.
std::vector<NamedTensor> export_params(const ParamSet<float>& params, const std::string& prefix = "");
ParamSet<float> import_params(const TensorFile& file, const std::string& prefix = "");

void save_params(const ParamSet<float>& params, const std::string& path);
ParamSet<float> load_params(const std::string& path);

}  // namespace stcl::nn
