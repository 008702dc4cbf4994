// Copyright 2026 The feedalign Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "feedalign/tensor.hpp"

namespace feedalign {

enum class Mode { kTrain, kEval };

struct ForwardContext {
  Mode mode = Mode::kTrain;
  std::mt19937_64* rng = nullptr;  // dropout masks; required in train mode
};

/// A trainable tensor and its gradient. `grad` is the batch-averaged
/// gradient of the mean loss, written by the owning layer's backward.
template <typename T>
struct Param {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  bool decay = true;  // participates in weight decay
};

/// Checkpoint type tags.
enum class LayerKind : std::uint8_t {
  kDense = 1,
  kConv2d = 2,
  kBatchNorm = 3,
  kActivation = 4,
  kDropout = 5,
  kMaxPool = 6,
  kFlatten = 7,
};

/// Layers act on a leading batch axis. backward() maps the error at the
/// output to the error at the input, using the state cached by the most
/// recent forward(), and fills the parameter gradients.
template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;

  virtual LayerKind kind() const = 0;
  virtual std::string describe() const = 0;

  virtual Tensor<T> forward(const Tensor<T>& x, const ForwardContext& ctx) = 0;
  virtual Tensor<T> backward(const Tensor<T>& error) = 0;

  /// Per-sample output shape for a per-sample input shape.
  virtual Shape output_shape(const Shape& in) const = 0;

  virtual void initialize(std::mt19937_64& /*rng*/) {}

  virtual std::vector<Param<T>*> params() { return {}; }
  /// Everything a checkpoint must persist: params first, then buffers.
  virtual std::vector<Tensor<T>*> persistent() {
    std::vector<Tensor<T>*> out;
    for (auto* p : params()) out.push_back(&p->value);
    return out;
  }
};

// Fully connected: out = x·Wᵀ + bias, W is [out × in].
template <typename T>
class DenseLayer final : public Layer<T> {
 public:
  DenseLayer(std::size_t in, std::size_t out);

  LayerKind kind() const override { return LayerKind::kDense; }
  std::string describe() const override;
  Tensor<T> forward(const Tensor<T>& x, const ForwardContext& ctx) override;
  Tensor<T> backward(const Tensor<T>& error) override;
  Shape output_shape(const Shape& in) const override;
  void initialize(std::mt19937_64& rng) override;
  std::vector<Param<T>*> params() override { return {&weight_, &bias_}; }

  /// e_next·W: the error at this layer's input. Applying f' is left to the
  /// activation layer that sits below.
  Tensor<T> backward_error(const Tensor<T>& error) const;
  /// dW = Σ_b outer(e[b], x[b]) / B, dbias = mean row of e.
  void compute_gradients(const Tensor<T>& error);

  std::size_t in_features() const { return weight_.value.dim(1); }
  std::size_t out_features() const { return weight_.value.dim(0); }
  Param<T>& weight() { return weight_; }
  const Param<T>& weight() const { return weight_; }
  Param<T>& bias() { return bias_; }
  const Tensor<T>& cached_input() const { return input_; }
  const Tensor<T>& cached_output() const { return output_; }

 private:
  Param<T> weight_;
  Param<T> bias_;
  Tensor<T> input_;
  Tensor<T> output_;
};

template <typename T>
class ConvLayer final : public Layer<T> {
 public:
  /// Without a bias the layer exposes only its kernel (used when batch
  /// norm follows and would cancel the bias anyway).
  ConvLayer(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
            Conv2dGeometry geo, bool bias = true);

  LayerKind kind() const override { return LayerKind::kConv2d; }
  std::string describe() const override;
  Tensor<T> forward(const Tensor<T>& x, const ForwardContext& ctx) override;
  Tensor<T> backward(const Tensor<T>& error) override;
  Shape output_shape(const Shape& in) const override;
  void initialize(std::mt19937_64& rng) override;
  std::vector<Param<T>*> params() override {
    if (has_bias_) return {&kernel_, &bias_};
    return {&kernel_};
  }

  Param<T>& kernel() { return kernel_; }
  Param<T>& bias() { return bias_; }
  bool has_bias() const { return has_bias_; }
  Conv2dGeometry geometry() const { return geo_; }

 private:
  Param<T> kernel_;
  Param<T> bias_;
  bool has_bias_;
  Conv2dGeometry geo_;
  Tensor<T> input_;
};

/// Normalizes per feature ([B×N]) or per channel ([B×C×H×W]).
template <typename T>
class BatchNormLayer final : public Layer<T> {
 public:
  explicit BatchNormLayer(std::size_t features, T epsilon = T(1e-5), T momentum = T(0.9));

  LayerKind kind() const override { return LayerKind::kBatchNorm; }
  std::string describe() const override;
  Tensor<T> forward(const Tensor<T>& x, const ForwardContext& ctx) override;
  Tensor<T> backward(const Tensor<T>& error) override;
  Shape output_shape(const Shape& in) const override { return in; }
  std::vector<Param<T>*> params() override { return {&gamma_, &beta_}; }
  std::vector<Tensor<T>*> persistent() override {
    return {&gamma_.value, &beta_.value, &running_mean_, &running_var_};
  }

  Param<T>& gamma() { return gamma_; }
  Param<T>& beta() { return beta_; }
  const Tensor<T>& running_mean() const { return running_mean_; }
  const Tensor<T>& running_var() const { return running_var_; }
  T epsilon() const { return epsilon_; }

 private:
  Param<T> gamma_;
  Param<T> beta_;
  Tensor<T> running_mean_;
  Tensor<T> running_var_;
  T epsilon_;
  T momentum_;
  // Cached by forward.
  Mode mode_ = Mode::kTrain;
  Tensor<T> xhat_;
  std::vector<T> inv_std_;
  bool has_cache_ = false;
};

enum class Activation : std::uint8_t { kReLU = 0, kSigmoid = 1, kTanh = 2 };

std::string activation_name(Activation kind);
Activation parse_activation(const std::string& name);

template <typename T>
Tensor<T> activation_forward(Activation kind, const Tensor<T>& x);
/// f'(x) evaluated at pre-activations x. ReLU'(0) is 0.
template <typename T>
Tensor<T> activation_derivative(Activation kind, const Tensor<T>& x);

template <typename T>
class ActivationLayer final : public Layer<T> {
 public:
  explicit ActivationLayer(Activation kind) : kind_(kind) {}

  LayerKind kind() const override { return LayerKind::kActivation; }
  std::string describe() const override { return activation_name(kind_); }
  Tensor<T> forward(const Tensor<T>& x, const ForwardContext& ctx) override;
  Tensor<T> backward(const Tensor<T>& error) override;
  Shape output_shape(const Shape& in) const override { return in; }

  Activation activation() const { return kind_; }
  /// f' at the cached pre-activation.
  Tensor<T> derivative() const;

 private:
  Activation kind_;
  Tensor<T> preact_;
};

/// Inverted dropout: kept units are scaled by 1/(1-p) in train mode.
template <typename T>
class DropoutLayer final : public Layer<T> {
 public:
  explicit DropoutLayer(T rate);

  LayerKind kind() const override { return LayerKind::kDropout; }
  std::string describe() const override;
  Tensor<T> forward(const Tensor<T>& x, const ForwardContext& ctx) override;
  Tensor<T> backward(const Tensor<T>& error) override;
  Shape output_shape(const Shape& in) const override { return in; }

  T rate() const { return rate_; }
  const std::optional<Tensor<T>>& mask() const { return mask_; }

 private:
  T rate_;
  std::optional<Tensor<T>> mask_;  // empty in eval mode (identity)
  bool has_cache_ = false;
};

/// Max pooling without padding; ties go to the lowest flat index.
template <typename T>
class MaxPoolLayer final : public Layer<T> {
 public:
  MaxPoolLayer(std::size_t window, std::size_t stride);

  LayerKind kind() const override { return LayerKind::kMaxPool; }
  std::string describe() const override;
  Tensor<T> forward(const Tensor<T>& x, const ForwardContext& ctx) override;
  Tensor<T> backward(const Tensor<T>& error) override;
  Shape output_shape(const Shape& in) const override;

  const std::vector<std::size_t>& argmax() const { return argmax_; }

 private:
  std::size_t window_;
  std::size_t stride_;
  Shape input_shape_;
  std::vector<std::size_t> argmax_;  // flat input index per output element
};

template <typename T>
class FlattenLayer final : public Layer<T> {
 public:
  LayerKind kind() const override { return LayerKind::kFlatten; }
  std::string describe() const override { return "flatten"; }
  Tensor<T> forward(const Tensor<T>& x, const ForwardContext& ctx) override;
  Tensor<T> backward(const Tensor<T>& error) override;
  Shape output_shape(const Shape& in) const override;

 private:
  Shape input_shape_;
};

}  // namespace feedalign
