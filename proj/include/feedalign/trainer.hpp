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
#include <functional>
#include <span>
#include <vector>

#include "feedalign/data.hpp"
#include "feedalign/network.hpp"

namespace feedalign {

/// Step decay: lr · factor^floor(epoch / every). every == 0 disables it.
struct LrSchedule {
  double factor = 1.0;
  std::size_t every = 0;

  double at(double base_lr, std::size_t epoch) const;
};

struct Hyperparams {
  double lr = 0.01;
  std::size_t batch = 100;
  double momentum = 0.9;
  LrSchedule decay;
  double weight_decay = 5e-4;
  std::size_t epochs = 10;
  std::uint64_t seed = 0;
  AugmentPolicy augment;

  /// ConfigError on any out-of-domain value.
  void validate() const;
};

/// Momentum buffers (one per parameter, same shapes) and counters.
template <typename T>
struct TrainState {
  std::vector<Tensor<T>> velocity;
  std::uint64_t epoch = 0;
  std::uint64_t step = 0;
  std::uint64_t seed = 0;
};

/// Loss and accuracies (percent) over a pass.
struct Metrics {
  double loss = 0.0;
  double top1 = 0.0;
  double top5 = 0.0;
};

template <typename T>
struct LossResult {
  T loss;          // mean over the batch
  Tensor<T> error; // softmax - onehot, per sample (not divided by B)
};

template <typename T>
LossResult<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const std::int32_t> labels);

/// Samples whose label ranks within the k largest logits; ties rank the
/// lower class index first.
template <typename T>
std::size_t topk_hits(const Tensor<T>& logits, std::span<const std::int32_t> labels, std::size_t k);

/// v ← μ·v + G + λ·W (λ only for params with decay), W ← W − lr·v.
template <typename T>
void sgd_momentum_step(std::span<Param<T>* const> params, TrainState<T>& state, double lr,
                       double momentum, double weight_decay);

template <typename T>
class Trainer {
 public:
  Trainer(Network<T>& net, Hyperparams hyper);

  /// One shuffled pass of forward / strategy backward / update. Applies the
  /// LR schedule for the current epoch, then advances the epoch counter.
  Metrics train_epoch(const Dataset& data);
  /// Eval mode, samples in order.
  Metrics evaluate(const Dataset& data);

  /// Runs after each backward pass and before the matching optimizer step,
  /// with the step index. The alignment logger hooks in here.
  using StepHook = std::function<void(std::uint64_t step)>;
  void set_pre_update_hook(StepHook hook) { pre_update_ = std::move(hook); }

  double lr_for_epoch(std::size_t epoch) const { return hyper_.decay.at(hyper_.lr, epoch); }
  const Hyperparams& hyper() const { return hyper_; }
  TrainState<T>& state() { return state_; }
  const TrainState<T>& state() const { return state_; }
  Network<T>& network() { return net_; }

 private:
  Network<T>& net_;
  Hyperparams hyper_;
  TrainState<T> state_;
  StepHook pre_update_;
};

template <typename T>
Metrics evaluate(Network<T>& net, const Dataset& data, std::size_t batch);

}  // namespace feedalign
