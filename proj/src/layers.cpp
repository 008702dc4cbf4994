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

#include "feedalign/layers.hpp"

#include <cmath>

namespace feedalign {
namespace {

template <typename T>
void he_normal(Tensor<T>& t, std::size_t fan_in, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  for (auto& v : t.values()) v = static_cast<T>(dist(rng));
}

void require_batch_width(const Shape& s, std::size_t width, const char* who) {
  if (s.size() != 2 || s[1] != width) {
    throw DimensionError(std::string(who) + ": expected [B x " + std::to_string(width) +
                         "], got " + shape_str(s));
  }
}

}  // namespace

// ---------------------------------------------------------------- Dense

template <typename T>
DenseLayer<T>::DenseLayer(std::size_t in, std::size_t out)
    : weight_{"weight", Tensor<T>({out, in}), Tensor<T>({out, in}), true},
      bias_{"bias", Tensor<T>({out}), Tensor<T>({out}), false} {}

template <typename T>
std::string DenseLayer<T>::describe() const {
  return "dense(" + std::to_string(in_features()) + "->" + std::to_string(out_features()) + ")";
}

template <typename T>
void DenseLayer<T>::initialize(std::mt19937_64& rng) {
  he_normal(weight_.value, in_features(), rng);
  bias_.value.fill(T(0));
}

template <typename T>
Shape DenseLayer<T>::output_shape(const Shape& in) const {
  if (shape_size(in) != in_features()) {
    throw DimensionError("dense: input " + shape_str(in) + " does not have " +
                         std::to_string(in_features()) + " features");
  }
  return {out_features()};
}

template <typename T>
Tensor<T> DenseLayer<T>::forward(const Tensor<T>& x, const ForwardContext& /*ctx*/) {
  require_batch_width(x.shape(), in_features(), "dense forward");
  Tensor<T> out = matmul_nt(x, weight_.value);
  const std::size_t batch = x.dim(0), width = out_features();
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t o = 0; o < width; ++o) out[b * width + o] += bias_.value[o];
  out.check_finite("dense forward");
  input_ = x;
  output_ = out;
  return out;
}

template <typename T>
Tensor<T> DenseLayer<T>::backward_error(const Tensor<T>& error) const {
  if (input_.empty()) throw StateError("dense backward: no cached forward");
  require_batch_width(error.shape(), out_features(), "dense backward");
  if (error.dim(0) != input_.dim(0)) {
    throw StateError("dense backward: error batch " + std::to_string(error.dim(0)) +
                     " differs from cached batch " + std::to_string(input_.dim(0)));
  }
  return matmul(error, weight_.value);
}

template <typename T>
void DenseLayer<T>::compute_gradients(const Tensor<T>& error) {
  if (input_.empty()) throw StateError("dense gradient: no cached forward");
  require_batch_width(error.shape(), out_features(), "dense gradient");
  const std::size_t batch = input_.dim(0);
  if (error.dim(0) != batch) {
    throw StateError("dense gradient: error batch " + std::to_string(error.dim(0)) +
                     " differs from cached batch " + std::to_string(batch));
  }
  const std::size_t in = in_features(), out = out_features();
  Tensor<T>& dw = weight_.grad;
  Tensor<T>& db = bias_.grad;
  dw.fill(T(0));
  db.fill(T(0));
  for (std::size_t b = 0; b < batch; ++b) {
    const T* xrow = input_.data() + b * in;
    for (std::size_t o = 0; o < out; ++o) {
      const T e = error[b * out + o];
      T* drow = dw.data() + o * in;
      for (std::size_t i = 0; i < in; ++i) drow[i] += e * xrow[i];
      db[o] += e;
    }
  }
  const T scale = T(batch);
  for (auto& v : dw.values()) v /= scale;
  for (auto& v : db.values()) v /= scale;
}

template <typename T>
Tensor<T> DenseLayer<T>::backward(const Tensor<T>& error) {
  compute_gradients(error);
  return backward_error(error);
}

// ---------------------------------------------------------------- Conv

template <typename T>
ConvLayer<T>::ConvLayer(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                        Conv2dGeometry geo, bool bias)
    : kernel_{"kernel", Tensor<T>({out_channels, in_channels, kernel, kernel}),
              Tensor<T>({out_channels, in_channels, kernel, kernel}), true},
      bias_{"bias", Tensor<T>({out_channels}), Tensor<T>({out_channels}), false},
      has_bias_(bias),
      geo_(geo) {
  if (geo.stride == 0) throw GeometryError("conv: stride must be >= 1");
}

template <typename T>
std::string ConvLayer<T>::describe() const {
  const auto& s = kernel_.value.shape();
  return "conv(" + std::to_string(s[1]) + "->" + std::to_string(s[0]) + ", k" +
         std::to_string(s[2]) + ", s" + std::to_string(geo_.stride) + ", p" +
         std::to_string(geo_.pad) + ")";
}

template <typename T>
void ConvLayer<T>::initialize(std::mt19937_64& rng) {
  const auto& s = kernel_.value.shape();
  he_normal(kernel_.value, s[1] * s[2] * s[3], rng);
  bias_.value.fill(T(0));
}

template <typename T>
Shape ConvLayer<T>::output_shape(const Shape& in) const {
  const auto& k = kernel_.value.shape();
  if (in.size() != 3 || in[0] != k[1]) {
    throw GeometryError("conv: input " + shape_str(in) + " incompatible with kernel " +
                        shape_str(k));
  }
  return {k[0], conv_output_extent(in[1], k[2], geo_.stride, geo_.pad),
          conv_output_extent(in[2], k[3], geo_.stride, geo_.pad)};
}

template <typename T>
Tensor<T> ConvLayer<T>::forward(const Tensor<T>& x, const ForwardContext& /*ctx*/) {
  Tensor<T> out = conv2d_forward(x, kernel_.value, geo_);
  input_ = x;
  if (!has_bias_) return out;
  const std::size_t n = out.dim(0), o = out.dim(1), plane = out.dim(2) * out.dim(3);
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t c = 0; c < o; ++c) {
      T* p = out.data() + (s * o + c) * plane;
      const T b = bias_.value[c];
      for (std::size_t i = 0; i < plane; ++i) p[i] += b;
    }
  return out;
}

template <typename T>
Tensor<T> ConvLayer<T>::backward(const Tensor<T>& error) {
  if (input_.empty()) throw StateError("conv backward: no cached forward");
  const auto& k = kernel_.value.shape();
  kernel_.grad = conv2d_backward_kernel(input_, error, geo_, k[2], k[3]);
  const std::size_t n = error.dim(0), o = error.dim(1), plane = error.dim(2) * error.dim(3);
  bias_.grad.fill(T(0));
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t c = 0; c < o; ++c) {
      const T* p = error.data() + (s * o + c) * plane;
      T acc = T(0);
      for (std::size_t i = 0; i < plane; ++i) acc += p[i];
      bias_.grad[c] += acc;
    }
  const T scale = T(input_.dim(0));
  for (auto& v : kernel_.grad.values()) v /= scale;
  for (auto& v : bias_.grad.values()) v /= scale;
  return conv2d_backward_data(error, kernel_.value, geo_, input_.dim(2), input_.dim(3));
}

// ---------------------------------------------------------------- BatchNorm

template <typename T>
BatchNormLayer<T>::BatchNormLayer(std::size_t features, T epsilon, T momentum)
    : gamma_{"gamma", Tensor<T>({features}, T(1)), Tensor<T>({features}), false},
      beta_{"beta", Tensor<T>({features}), Tensor<T>({features}), false},
      running_mean_({features}),
      running_var_({features}, T(1)),
      epsilon_(epsilon),
      momentum_(momentum) {
  if (!(epsilon > T(0))) throw ConfigError("batchnorm: epsilon must be > 0");
  if (!(momentum > T(0) && momentum < T(1))) {
    throw ConfigError("batchnorm: running-stat momentum must lie in (0, 1)");
  }
}

template <typename T>
std::string BatchNormLayer<T>::describe() const {
  return "batchnorm(" + std::to_string(gamma_.value.size()) + ")";
}

template <typename T>
Tensor<T> BatchNormLayer<T>::forward(const Tensor<T>& x, const ForwardContext& ctx) {
  const std::size_t features = gamma_.value.size();
  if ((x.rank() != 2 && x.rank() != 4) || x.dim(1) != features) {
    throw DimensionError("batchnorm: expected [B x " + std::to_string(features) +
                         " (x H x W)], got " + shape_str(x.shape()));
  }
  const std::size_t batch = x.dim(0);
  const std::size_t spatial = x.size() / (batch * features);
  const std::size_t count = batch * spatial;
  mode_ = ctx.mode;
  xhat_ = Tensor<T>(x.shape());
  inv_std_.assign(features, T(0));
  Tensor<T> y(x.shape());

  if (ctx.mode == Mode::kTrain && batch < 2) {
    throw StateError("batchnorm: train mode needs a batch of at least 2, got " +
                     std::to_string(batch));
  }
  for (std::size_t c = 0; c < features; ++c) {
    T mean, var;
    if (ctx.mode == Mode::kTrain) {
      T acc = T(0);
      for (std::size_t b = 0; b < batch; ++b) {
        const T* p = x.data() + (b * features + c) * spatial;
        for (std::size_t i = 0; i < spatial; ++i) acc += p[i];
      }
      mean = acc / T(count);
      T sq = T(0);
      for (std::size_t b = 0; b < batch; ++b) {
        const T* p = x.data() + (b * features + c) * spatial;
        for (std::size_t i = 0; i < spatial; ++i) sq += (p[i] - mean) * (p[i] - mean);
      }
      var = sq / T(count);
      running_mean_[c] = momentum_ * running_mean_[c] + (T(1) - momentum_) * mean;
      running_var_[c] = momentum_ * running_var_[c] +
                        (T(1) - momentum_) * var * T(count) / T(count - 1);
    } else {
      mean = running_mean_[c];
      var = running_var_[c];
    }
    const T inv = T(1) / std::sqrt(var + epsilon_);
    inv_std_[c] = inv;
    const T g = gamma_.value[c], bt = beta_.value[c];
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t off = (b * features + c) * spatial;
      for (std::size_t i = 0; i < spatial; ++i) {
        const T xh = (x[off + i] - mean) * inv;
        xhat_[off + i] = xh;
        y[off + i] = g * xh + bt;
      }
    }
  }
  has_cache_ = true;
  y.check_finite("batchnorm forward");
  return y;
}

template <typename T>
Tensor<T> BatchNormLayer<T>::backward(const Tensor<T>& error) {
  if (!has_cache_) throw StateError("batchnorm backward: no cached forward");
  if (error.shape() != xhat_.shape()) {
    throw DimensionError("batchnorm backward: error " + shape_str(error.shape()) +
                         " does not match cached " + shape_str(xhat_.shape()));
  }
  const std::size_t features = gamma_.value.size();
  const std::size_t batch = error.dim(0);
  const std::size_t spatial = error.size() / (batch * features);
  const T count = T(batch * spatial);
  Tensor<T> dx(error.shape());
  for (std::size_t c = 0; c < features; ++c) {
    T sum_e = T(0), sum_e_xhat = T(0);
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t off = (b * features + c) * spatial;
      for (std::size_t i = 0; i < spatial; ++i) {
        sum_e += error[off + i];
        sum_e_xhat += error[off + i] * xhat_[off + i];
      }
    }
    gamma_.grad[c] = sum_e_xhat / T(batch);
    beta_.grad[c] = sum_e / T(batch);
    const T g = gamma_.value[c], inv = inv_std_[c];
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t off = (b * features + c) * spatial;
      for (std::size_t i = 0; i < spatial; ++i) {
        if (mode_ == Mode::kTrain) {
          // dxhat = g·e, so Σdxhat = g·Σe and Σ dxhat·xhat = g·Σ e·xhat.
          dx[off + i] = g * inv / count *
                        (count * error[off + i] - sum_e - xhat_[off + i] * sum_e_xhat);
        } else {
          dx[off + i] = g * inv * error[off + i];
        }
      }
    }
  }
  dx.check_finite("batchnorm backward");
  return dx;
}

// ---------------------------------------------------------------- Activation

std::string activation_name(Activation kind) {
  switch (kind) {
    case Activation::kReLU: return "relu";
    case Activation::kSigmoid: return "sigmoid";
    case Activation::kTanh: return "tanh";
  }
  return "?";
}

Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::kReLU;
  if (name == "sigmoid") return Activation::kSigmoid;
  if (name == "tanh") return Activation::kTanh;
  throw ConfigError("unknown activation '" + name + "'");
}

namespace {

template <typename T>
T sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

}  // namespace

template <typename T>
Tensor<T> activation_forward(Activation kind, const Tensor<T>& x) {
  x.check_finite("activation input");
  Tensor<T> y = x;
  for (auto& v : y.values()) {
    switch (kind) {
      case Activation::kReLU: v = v > T(0) ? v : T(0); break;
      case Activation::kSigmoid: v = sigmoid(v); break;
      case Activation::kTanh: v = std::tanh(v); break;
    }
  }
  return y;
}

template <typename T>
Tensor<T> activation_derivative(Activation kind, const Tensor<T>& x) {
  x.check_finite("activation input");
  Tensor<T> d = x;
  for (auto& v : d.values()) {
    switch (kind) {
      case Activation::kReLU: v = v > T(0) ? T(1) : T(0); break;
      case Activation::kSigmoid: {
        const T y = sigmoid(v);
        v = y * (T(1) - y);
        break;
      }
      case Activation::kTanh: {
        const T y = std::tanh(v);
        v = T(1) - y * y;
        break;
      }
    }
  }
  return d;
}

template <typename T>
Tensor<T> ActivationLayer<T>::forward(const Tensor<T>& x, const ForwardContext& /*ctx*/) {
  preact_ = x;
  return activation_forward(kind_, x);
}

template <typename T>
Tensor<T> ActivationLayer<T>::derivative() const {
  if (preact_.empty()) throw StateError("activation: no cached pre-activation");
  return activation_derivative(kind_, preact_);
}

template <typename T>
Tensor<T> ActivationLayer<T>::backward(const Tensor<T>& error) {
  return hadamard(error, derivative());
}

// ---------------------------------------------------------------- Dropout

template <typename T>
DropoutLayer<T>::DropoutLayer(T rate) : rate_(rate) {
  if (!(rate >= T(0) && rate < T(1))) throw ConfigError("dropout rate must lie in [0, 1)");
}

template <typename T>
std::string DropoutLayer<T>::describe() const {
  return "dropout(" + std::to_string(rate_) + ")";
}

template <typename T>
Tensor<T> DropoutLayer<T>::forward(const Tensor<T>& x, const ForwardContext& ctx) {
  has_cache_ = true;
  if (ctx.mode == Mode::kEval) {
    mask_.reset();
    return x;
  }
  if (ctx.rng == nullptr) throw StateError("dropout: train mode needs an rng");
  Tensor<T> mask(x.shape());
  const T keep_scale = T(1) / (T(1) - rate_);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& m : mask.values()) m = u(*ctx.rng) < 1.0 - static_cast<double>(rate_) ? keep_scale : T(0);
  Tensor<T> y = x;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= mask[i];
  mask_ = std::move(mask);
  return y;
}

template <typename T>
Tensor<T> DropoutLayer<T>::backward(const Tensor<T>& error) {
  if (!has_cache_) throw StateError("dropout backward: no cached mask");
  if (!mask_) return error;
  return hadamard(error, *mask_);
}

// ---------------------------------------------------------------- MaxPool

template <typename T>
MaxPoolLayer<T>::MaxPoolLayer(std::size_t window, std::size_t stride)
    : window_(window), stride_(stride) {
  if (window == 0 || stride == 0) throw GeometryError("maxpool: window and stride must be >= 1");
}

template <typename T>
std::string MaxPoolLayer<T>::describe() const {
  return "maxpool(" + std::to_string(window_) + ", s" + std::to_string(stride_) + ")";
}

template <typename T>
Shape MaxPoolLayer<T>::output_shape(const Shape& in) const {
  if (in.size() != 3) throw GeometryError("maxpool: expected C x H x W, got " + shape_str(in));
  return {in[0], conv_output_extent(in[1], window_, stride_, 0),
          conv_output_extent(in[2], window_, stride_, 0)};
}

template <typename T>
Tensor<T> MaxPoolLayer<T>::forward(const Tensor<T>& x, const ForwardContext& /*ctx*/) {
  if (x.rank() != 4) throw GeometryError("maxpool: expected rank-4 input, got " + shape_str(x.shape()));
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t oh = conv_output_extent(h, window_, stride_, 0);
  const std::size_t ow = conv_output_extent(w, window_, stride_, 0);
  Tensor<T> out({n, c, oh, ow});
  argmax_.assign(out.size(), 0);
  std::size_t o = 0;
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t plane = (s * c + ch) * h * w;
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t xo = 0; xo < ow; ++xo, ++o) {
          std::size_t best = plane + (y * stride_) * w + xo * stride_;
          for (std::size_t ki = 0; ki < window_; ++ki)
            for (std::size_t kj = 0; kj < window_; ++kj) {
              const std::size_t idx = plane + (y * stride_ + ki) * w + xo * stride_ + kj;
              if (x[idx] > x[best]) best = idx;
            }
          argmax_[o] = best;
          out[o] = x[best];
        }
    }
  input_shape_ = x.shape();
  return out;
}

template <typename T>
Tensor<T> MaxPoolLayer<T>::backward(const Tensor<T>& error) {
  if (input_shape_.empty()) throw StateError("maxpool backward: no cached forward");
  if (error.size() != argmax_.size()) {
    throw GeometryError("maxpool backward: error " + shape_str(error.shape()) +
                        " does not match cached output of " + std::to_string(argmax_.size()) +
                        " elements");
  }
  Tensor<T> dx(input_shape_);
  for (std::size_t i = 0; i < argmax_.size(); ++i) dx[argmax_[i]] += error[i];
  return dx;
}

// ---------------------------------------------------------------- Flatten

template <typename T>
Shape FlattenLayer<T>::output_shape(const Shape& in) const {
  return {shape_size(in)};
}

template <typename T>
Tensor<T> FlattenLayer<T>::forward(const Tensor<T>& x, const ForwardContext& /*ctx*/) {
  if (x.rank() < 2) throw RankError("flatten: expected a batch axis, got " + shape_str(x.shape()));
  input_shape_ = x.shape();
  return x.reshaped({x.dim(0), x.size() / x.dim(0)});
}

template <typename T>
Tensor<T> FlattenLayer<T>::backward(const Tensor<T>& error) {
  if (input_shape_.empty()) throw StateError("flatten backward: no cached forward");
  return error.reshaped(input_shape_);
}

#define FEEDALIGN_INSTANTIATE(T)                                             \
  template class DenseLayer<T>;                                              \
  template class ConvLayer<T>;                                               \
  template class BatchNormLayer<T>;                                          \
  template class ActivationLayer<T>;                                         \
  template class DropoutLayer<T>;                                            \
  template class MaxPoolLayer<T>;                                            \
  template class FlattenLayer<T>;                                            \
  template Tensor<T> activation_forward(Activation, const Tensor<T>&);       \
  template Tensor<T> activation_derivative(Activation, const Tensor<T>&);

FEEDALIGN_INSTANTIATE(float)
FEEDALIGN_INSTANTIATE(double)

#undef FEEDALIGN_INSTANTIATE

}  // namespace feedalign
