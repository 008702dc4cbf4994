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
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "feedalign/feedback.hpp"
#include "feedalign/layers.hpp"
#include "feedalign/random.hpp"

namespace feedalign {

/// How errors cross the fully-connected tail. Convolutional layers always
/// use exact back-propagation; with a conv stack, kDFA/kBDFA are the hybrid
/// conv-BP / FC-DFA scheme.
enum class Strategy : std::uint8_t { kBP = 0, kFA = 1, kDFA = 2, kBDFA = 3 };

std::string strategy_name(Strategy s);
/// Accepts bp, fa, dfa, cdfa (alias of dfa), bdfa, cbdfa (alias of bdfa).
Strategy parse_strategy(const std::string& name);

enum class Precision : std::uint8_t { kFloat32 = 4, kFloat64 = 8 };

struct DenseSpec {
  std::size_t units;
};
// Built without a bias when a BatchNormSpec follows directly.
struct ConvSpec {
  std::size_t channels;
  std::size_t kernel = 3;
  std::size_t stride = 1;
  std::size_t pad = 1;
};
struct BatchNormSpec {};
struct ActivationSpec {
  Activation kind = Activation::kReLU;
};
struct DropoutSpec {
  double rate = 0.5;
};
struct MaxPoolSpec {
  std::size_t window = 2;
  std::size_t stride = 2;
};
struct FlattenSpec {};

using LayerSpec = std::variant<DenseSpec, ConvSpec, BatchNormSpec, ActivationSpec, DropoutSpec,
                               MaxPoolSpec, FlattenSpec>;

struct NetworkSpec {
  std::string name;
  Shape input_shape;  // per sample: {D} or {C, H, W}
  std::vector<LayerSpec> layers;
  Strategy fc_strategy = Strategy::kBP;
  FeedbackInit feedback_init;
  Precision precision = Precision::kFloat32;
  /// Rebuild product feedback from the current weights at every epoch
  /// start. Off by default; feedback is otherwise frozen at construction.
  bool refresh_feedback = false;

  std::size_t class_count() const;
  /// Throws ConfigError unless the layout is a (possibly empty) conv stack
  /// followed by one contiguous FC tail ending in a Dense layer.
  void validate() const;
};

/// Feedback for one hidden FC layer; empty under BP.
template <typename T>
using FeedbackSlot = std::variant<std::monostate, FeedbackMatrix<T>, BinaryFeedbackMatrix>;

template <typename T>
class Network {
 public:
  Network(NetworkSpec spec, std::uint64_t init_seed);

  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;
  Network(Network&&) = default;
  Network& operator=(Network&&) = default;

  const NetworkSpec& spec() const { return spec_; }
  Strategy strategy() const { return spec_.fc_strategy; }

  Tensor<T> forward(const Tensor<T>& x, const ForwardContext& ctx);

  /// Fills every parameter gradient from the output error e_L (softmax
  /// minus one-hot, not batch-averaged) using the network's strategy.
  void backward(const Tensor<T>& e_last);
  /// Same with an explicit strategy; `fc_order`, when given, is the order in
  /// which hidden FC errors are produced under direct feedback (serially).
  void backward(const Tensor<T>& e_last, Strategy strategy,
                std::span<const std::size_t> fc_order = {});

  std::vector<Param<T>*> params();
  std::vector<std::unique_ptr<Layer<T>>>& layers() { return layers_; }
  const std::vector<std::unique_ptr<Layer<T>>>& layers() const { return layers_; }

  /// Layer index of the first Dense layer (== size of the conv stack).
  std::size_t fc_begin() const { return fc_begin_; }
  std::size_t dense_count() const { return dense_.size(); }
  DenseLayer<T>& dense(std::size_t k) { return *dense_[k].layer; }
  const DenseLayer<T>& dense(std::size_t k) const { return *dense_[k].layer; }

  /// Builds feedback for every hidden FC layer from `spec().feedback_init`
  /// and the current weights. Called once by the constructor.
  void build_feedback();
  void set_feedback(std::size_t hidden, FeedbackSlot<T> slot);
  const std::vector<FeedbackSlot<T>>& feedback() const { return feedback_; }

  /// Error at each Dense layer's output from the last backward(); the last
  /// entry is e_L.
  const std::vector<Tensor<T>>& fc_errors() const { return fc_errors_; }
  /// Error handed to the conv stack (input side of the first Dense layer).
  const Tensor<T>& junction_error() const { return junction_error_; }

 private:
  struct DenseSite {
    DenseLayer<T>* layer;
    std::size_t index;                  // position in layers_
    std::vector<std::size_t> followers;  // local layers up to the next Dense
  };

  Tensor<T> block_backward(std::size_t k, Tensor<T> g);
  Tensor<T> project(std::size_t hidden, const Tensor<T>& source) const;
  void backward_conv_stack(const Tensor<T>& error);

  NetworkSpec spec_;
  std::vector<std::unique_ptr<Layer<T>>> layers_;
  std::vector<DenseSite> dense_;
  std::size_t fc_begin_ = 0;
  std::vector<FeedbackSlot<T>> feedback_;
  std::vector<Tensor<T>> fc_errors_;
  Tensor<T> junction_error_;
};

}  // namespace feedalign
