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

#include "feedalign/network.hpp"

#include <algorithm>
#include <optional>
#include <type_traits>

#include "feedalign/parallel.hpp"

namespace feedalign {

std::string strategy_name(Strategy s) {
  switch (s) {
    case Strategy::kBP: return "bp";
    case Strategy::kFA: return "fa";
    case Strategy::kDFA: return "dfa";
    case Strategy::kBDFA: return "bdfa";
  }
  return "?";
}

Strategy parse_strategy(const std::string& name) {
  if (name == "bp") return Strategy::kBP;
  if (name == "fa") return Strategy::kFA;
  if (name == "dfa" || name == "cdfa") return Strategy::kDFA;
  if (name == "bdfa" || name == "cbdfa") return Strategy::kBDFA;
  throw ConfigError("unknown strategy '" + name + "' (expected bp|fa|dfa|cdfa|bdfa)");
}

std::size_t NetworkSpec::class_count() const {
  for (auto it = layers.rbegin(); it != layers.rend(); ++it) {
    if (const auto* d = std::get_if<DenseSpec>(&*it)) return d->units;
  }
  return 0;
}

void NetworkSpec::validate() const {
  if (input_shape.empty()) throw ConfigError("network '" + name + "': input shape is empty");
  if (layers.empty()) throw ConfigError("network '" + name + "': no layers");
  if (!std::holds_alternative<DenseSpec>(layers.back())) {
    throw ConfigError("network '" + name + "': the last layer must be fully connected");
  }
  bool in_fc = false;
  for (const auto& l : layers) {
    if (std::holds_alternative<DenseSpec>(l)) in_fc = true;
    if (in_fc && (std::holds_alternative<ConvSpec>(l) || std::holds_alternative<MaxPoolSpec>(l) ||
                  std::holds_alternative<FlattenSpec>(l))) {
      throw ConfigError("network '" + name +
                        "': conv/pool/flatten layers must precede the fully-connected tail");
    }
  }
  if (class_count() < 2) throw ConfigError("network '" + name + "': need at least 2 classes");
}

namespace {

template <typename T>
std::unique_ptr<Layer<T>> make_layer(const LayerSpec& spec, const Shape& in, bool before_norm) {
  return std::visit(
      [&](const auto& s) -> std::unique_ptr<Layer<T>> {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, DenseSpec>) {
          if (in.size() != 1) {
            throw ConfigError("dense layer needs a flat input, got " + shape_str(in) +
                              " (insert a flatten layer)");
          }
          return std::make_unique<DenseLayer<T>>(in[0], s.units);
        } else if constexpr (std::is_same_v<S, ConvSpec>) {
          if (in.size() != 3) throw ConfigError("conv layer needs C x H x W input, got " + shape_str(in));
          return std::make_unique<ConvLayer<T>>(in[0], s.channels, s.kernel,
                                                Conv2dGeometry{s.stride, s.pad}, !before_norm);
        } else if constexpr (std::is_same_v<S, BatchNormSpec>) {
          return std::make_unique<BatchNormLayer<T>>(in[0]);
        } else if constexpr (std::is_same_v<S, ActivationSpec>) {
          return std::make_unique<ActivationLayer<T>>(s.kind);
        } else if constexpr (std::is_same_v<S, DropoutSpec>) {
          return std::make_unique<DropoutLayer<T>>(static_cast<T>(s.rate));
        } else if constexpr (std::is_same_v<S, MaxPoolSpec>) {
          return std::make_unique<MaxPoolLayer<T>>(s.window, s.stride);
        } else {
          return std::make_unique<FlattenLayer<T>>();
        }
      },
      spec);
}

}  // namespace

template <typename T>
Network<T>::Network(NetworkSpec spec, std::uint64_t init_seed) : spec_(std::move(spec)) {
  spec_.validate();
  std::mt19937_64 rng(derive_seed(init_seed, kStreamInit));
  Shape shape = spec_.input_shape;
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    // A conv bias right before batch norm is cancelled by it; leave it out.
    const bool before_norm =
        i + 1 < spec_.layers.size() && std::holds_alternative<BatchNormSpec>(spec_.layers[i + 1]);
    auto layer = make_layer<T>(spec_.layers[i], shape, before_norm);
    layer->initialize(rng);
    shape = layer->output_shape(shape);
    layers_.push_back(std::move(layer));
  }
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (auto* d = dynamic_cast<DenseLayer<T>*>(layers_[i].get())) {
      if (dense_.empty()) fc_begin_ = i;
      dense_.push_back({d, i, {}});
    } else if (!dense_.empty()) {
      dense_.back().followers.push_back(i);
    }
  }
  feedback_.resize(dense_.size() - 1);
  build_feedback();
}

template <typename T>
void Network<T>::build_feedback() {
  const std::size_t hidden = dense_.size() - 1;
  feedback_.assign(hidden, std::monostate{});
  if (spec_.fc_strategy == Strategy::kBP) return;
  const FeedbackInit& init = spec_.feedback_init;
  const bool layerwise = spec_.fc_strategy == Strategy::kFA;
  for (std::size_t k = 0; k < hidden; ++k) {
    const std::size_t last = layerwise ? k + 1 : dense_.size() - 1;
    const std::size_t rows = dense_[k].layer->out_features();
    const std::size_t cols = dense_[last].layer->out_features();
    std::optional<FeedbackMatrix<T>> dense_fb;
    if (init.scheme == FeedbackScheme::kRandomHe || init.scheme == FeedbackScheme::kRandomUniform) {
      dense_fb.emplace(build_random_feedback<T>(rows, cols, init.scheme, derive_seed(init.seed, k)));
    } else {
      std::vector<Tensor<T>> chain;
      for (std::size_t j = k + 1; j <= last; ++j) chain.push_back(dense_[j].layer->weight().value);
      dense_fb.emplace(build_product_feedback<T>(chain));
      if (init.scheme == FeedbackScheme::kSignProduct && spec_.fc_strategy != Strategy::kBDFA) {
        dense_fb.emplace(binarize_sign(*dense_fb).template expand<T>(), FeedbackOrigin::kProduct);
      }
    }
    if (spec_.fc_strategy == Strategy::kBDFA) {
      feedback_[k] = binarize_sign(*dense_fb);
    } else {
      feedback_[k] = std::move(*dense_fb);
    }
  }
}

template <typename T>
void Network<T>::set_feedback(std::size_t hidden, FeedbackSlot<T> slot) {
  feedback_.at(hidden) = std::move(slot);
}

template <typename T>
Tensor<T> Network<T>::forward(const Tensor<T>& x, const ForwardContext& ctx) {
  Shape expect = spec_.input_shape;
  expect.insert(expect.begin(), x.empty() ? 0 : x.dim(0));
  if (x.shape() != expect) {
    throw DimensionError("network '" + spec_.name + "': input " + shape_str(x.shape()) +
                         " does not match " + shape_str(expect));
  }
  Tensor<T> h = x;
  for (auto& layer : layers_) h = layer->forward(h, ctx);
  h.check_finite("network output");
  return h;
}

template <typename T>
std::vector<Param<T>*> Network<T>::params() {
  std::vector<Param<T>*> out;
  for (auto& layer : layers_)
    for (auto* p : layer->params()) out.push_back(p);
  return out;
}

template <typename T>
Tensor<T> Network<T>::block_backward(std::size_t k, Tensor<T> g) {
  const auto& followers = dense_[k].followers;
  for (auto it = followers.rbegin(); it != followers.rend(); ++it) g = layers_[*it]->backward(g);
  return g;
}

template <typename T>
Tensor<T> Network<T>::project(std::size_t hidden, const Tensor<T>& source) const {
  return std::visit(
      [&](const auto& fb) -> Tensor<T> {
        using F = std::decay_t<decltype(fb)>;
        if constexpr (std::is_same_v<F, std::monostate>) {
          throw ConfigError("network '" + spec_.name + "': hidden FC layer " +
                            std::to_string(hidden) + " has no feedback matrix");
        } else {
          return project_error<T>(fb, source);
        }
      },
      feedback_.at(hidden));
}

template <typename T>
void Network<T>::backward_conv_stack(const Tensor<T>& error) {
  Tensor<T> e = error;
  for (std::size_t i = fc_begin_; i-- > 0;) e = layers_[i]->backward(e);
}

template <typename T>
void Network<T>::backward(const Tensor<T>& e_last) {
  backward(e_last, spec_.fc_strategy);
}

template <typename T>
void Network<T>::backward(const Tensor<T>& e_last, Strategy strategy,
                          std::span<const std::size_t> fc_order) {
  const std::size_t m = dense_.size();
  const auto& out = dense_.back().layer->cached_output();
  if (out.empty()) throw StateError("network '" + spec_.name + "': backward before forward");
  if (e_last.shape() != out.shape()) {
    throw DimensionError("output error " + shape_str(e_last.shape()) + " does not match logits " +
                         shape_str(out.shape()));
  }
  fc_errors_.assign(m, Tensor<T>());
  fc_errors_[m - 1] = e_last;
  dense_[m - 1].layer->compute_gradients(e_last);

  switch (strategy) {
    case Strategy::kBP:
      for (std::size_t k = m - 1; k-- > 0;) {
        fc_errors_[k] = block_backward(k, dense_[k + 1].layer->backward_error(fc_errors_[k + 1]));
        dense_[k].layer->compute_gradients(fc_errors_[k]);
      }
      break;
    case Strategy::kFA:
      for (std::size_t k = m - 1; k-- > 0;) {
        fc_errors_[k] = block_backward(k, project(k, fc_errors_[k + 1]));
        dense_[k].layer->compute_gradients(fc_errors_[k]);
      }
      break;
    case Strategy::kDFA:
    case Strategy::kBDFA: {
      if (strategy == Strategy::kBDFA) {
        for (std::size_t k = 0; k + 1 < m; ++k) {
          if (!std::holds_alternative<BinaryFeedbackMatrix>(feedback_[k])) {
            throw ConfigError("binary direct feedback needs packed sign matrices");
          }
        }
      }
      // Every hidden error depends on e_L alone.
      auto hidden_error = [&](std::size_t k) {
        fc_errors_[k] = block_backward(k, project(k, e_last));
        dense_[k].layer->compute_gradients(fc_errors_[k]);
      };
      if (!fc_order.empty()) {
        std::vector<std::size_t> sorted(fc_order.begin(), fc_order.end());
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t i = 0; i < sorted.size(); ++i) {
          if (sorted.size() != m - 1 || sorted[i] != i) {
            throw ConfigError("fc_order must be a permutation of the hidden FC layers");
          }
        }
        for (auto k : fc_order) hidden_error(k);
      } else {
        parallel_for(m - 1, hidden_error);
      }
      break;
    }
  }

  junction_error_ = Tensor<T>();
  if (fc_begin_ > 0) {
    junction_error_ = dense_[0].layer->backward_error(fc_errors_[0]);
    backward_conv_stack(junction_error_);
  }
}

template class Network<float>;
template class Network<double>;

}  // namespace feedalign
