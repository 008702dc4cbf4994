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

#include "feedalign/trainer.hpp"

#include <algorithm>
#include <cmath>

namespace feedalign {

double LrSchedule::at(double base_lr, std::size_t epoch) const {
  if (every == 0) return base_lr;
  return base_lr * std::pow(factor, static_cast<double>(epoch / every));
}

void Hyperparams::validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("learning rate must be >= 0");
  if (batch == 0) throw ConfigError("batch size must be >= 1");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight decay must be >= 0");
  if (decay.every > 0 && !(decay.factor > 0.0)) throw ConfigError("lr decay factor must be > 0");
  if (!(augment.hflip_prob >= 0.0 && augment.hflip_prob <= 1.0)) {
    throw ConfigError("flip probability must lie in [0, 1]");
  }
}

template <typename T>
LossResult<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const std::int32_t> labels) {
  if (logits.rank() != 2) throw RankError("softmax_cross_entropy: logits " + shape_str(logits.shape()));
  const std::size_t batch = logits.dim(0), classes = logits.dim(1);
  if (labels.size() != batch) {
    throw DataError("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                    std::to_string(batch) + " rows");
  }
  logits.check_finite("logits");
  LossResult<T> r{T(0), Tensor<T>(logits.shape())};
  T total = T(0);
  for (std::size_t b = 0; b < batch; ++b) {
    const std::int32_t y = labels[b];
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw DataError("label " + std::to_string(y) + " outside [0, " + std::to_string(classes) + ")");
    }
    const T* z = logits.data() + b * classes;
    const T zmax = *std::max_element(z, z + classes);
    T denom = T(0);
    for (std::size_t c = 0; c < classes; ++c) denom += std::exp(z[c] - zmax);
    const T log_denom = std::log(denom);
    total += log_denom - (z[y] - zmax);
    T* e = r.error.data() + b * classes;
    for (std::size_t c = 0; c < classes; ++c) e[c] = std::exp(z[c] - zmax - log_denom);
    e[y] -= T(1);
  }
  r.loss = total / T(batch);
  return r;
}

template <typename T>
std::size_t topk_hits(const Tensor<T>& logits, std::span<const std::int32_t> labels, std::size_t k) {
  const std::size_t batch = logits.dim(0), classes = logits.dim(1);
  std::size_t hits = 0;
  for (std::size_t b = 0; b < batch; ++b) {
    const T* z = logits.data() + b * classes;
    const auto y = static_cast<std::size_t>(labels[b]);
    std::size_t ahead = 0;
    for (std::size_t c = 0; c < classes; ++c) {
      if (z[c] > z[y] || (z[c] == z[y] && c < y)) ++ahead;
    }
    if (ahead < k) ++hits;
  }
  return hits;
}

template <typename T>
void sgd_momentum_step(std::span<Param<T>* const> params, TrainState<T>& state, double lr,
                       double momentum, double weight_decay) {
  if (state.velocity.empty()) {
    for (auto* p : params) state.velocity.emplace_back(p->value.shape());
  }
  if (state.velocity.size() != params.size()) {
    throw DimensionError("optimizer state holds " + std::to_string(state.velocity.size()) +
                         " buffers for " + std::to_string(params.size()) + " parameters");
  }
  const T mu = static_cast<T>(momentum), eta = static_cast<T>(lr), lambda = static_cast<T>(weight_decay);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Param<T>& p = *params[i];
    Tensor<T>& v = state.velocity[i];
    if (v.shape() != p.value.shape() || p.grad.shape() != p.value.shape()) {
      throw DimensionError("parameter '" + p.name + "' " + shape_str(p.value.shape()) +
                           " does not match gradient " + shape_str(p.grad.shape()) +
                           " / velocity " + shape_str(v.shape()));
    }
    const bool decay = p.decay && lambda != T(0);
    for (std::size_t j = 0; j < v.size(); ++j) {
      T g = p.grad[j];
      if (decay) g += lambda * p.value[j];
      v[j] = mu * v[j] + g;
      p.value[j] -= eta * v[j];
    }
    p.value.check_finite("parameter '" + p.name + "'");
  }
  ++state.step;
}

template <typename T>
Trainer<T>::Trainer(Network<T>& net, Hyperparams hyper) : net_(net), hyper_(std::move(hyper)) {
  hyper_.validate();
  state_.seed = hyper_.seed;
}

template <typename T>
Metrics Trainer<T>::train_epoch(const Dataset& data) {
  if (data.size() == 0) throw DataError("cannot train on an empty dataset");
  const std::size_t epoch = state_.epoch;
  const double lr = lr_for_epoch(epoch);
  if (net_.spec().refresh_feedback && epoch > 0) net_.build_feedback();

  const auto order = batches(data.size(), std::min(hyper_.batch, data.size()),
                             derive_seed(hyper_.seed, kStreamShuffle), epoch);
  std::mt19937_64 dropout_rng(derive_seed(derive_seed(hyper_.seed, kStreamDropout), epoch));
  std::mt19937_64 augment_rng(derive_seed(derive_seed(hyper_.seed, kStreamAugment), epoch));
  const ForwardContext ctx{Mode::kTrain, &dropout_rng};
  auto params = net_.params();

  double loss_sum = 0.0;
  std::size_t top1 = 0, top5 = 0;
  for (const auto& idx : order) {
    Tensor<T> x = gather_features<T>(data, idx);
    const auto y = gather_labels(data, idx);
    augment(x, hyper_.augment, augment_rng);
    const Tensor<T> logits = net_.forward(x, ctx);
    auto lr_out = softmax_cross_entropy<T>(logits, y);
    loss_sum += static_cast<double>(lr_out.loss) * static_cast<double>(idx.size());
    top1 += topk_hits<T>(logits, y, 1);
    top5 += topk_hits<T>(logits, y, 5);
    net_.backward(lr_out.error);
    if (pre_update_) pre_update_(state_.step);
    sgd_momentum_step<T>(params, state_, lr, hyper_.momentum, hyper_.weight_decay);
  }
  ++state_.epoch;
  const double n = static_cast<double>(data.size());
  return {loss_sum / n, 100.0 * static_cast<double>(top1) / n, 100.0 * static_cast<double>(top5) / n};
}

template <typename T>
Metrics evaluate(Network<T>& net, const Dataset& data, std::size_t batch) {
  if (data.size() == 0) throw DataError("cannot evaluate an empty dataset");
  if (batch == 0) batch = data.size();
  const ForwardContext ctx{Mode::kEval, nullptr};
  double loss_sum = 0.0;
  std::size_t top1 = 0, top5 = 0;
  std::vector<std::size_t> idx;
  for (std::size_t lo = 0; lo < data.size(); lo += batch) {
    idx.clear();
    for (std::size_t i = lo; i < std::min(data.size(), lo + batch); ++i) idx.push_back(i);
    const Tensor<T> logits = net.forward(gather_features<T>(data, idx), ctx);
    const auto y = gather_labels(data, idx);
    loss_sum += static_cast<double>(softmax_cross_entropy<T>(logits, y).loss) *
                static_cast<double>(idx.size());
    top1 += topk_hits<T>(logits, y, 1);
    top5 += topk_hits<T>(logits, y, 5);
  }
  const double n = static_cast<double>(data.size());
  return {loss_sum / n, 100.0 * static_cast<double>(top1) / n, 100.0 * static_cast<double>(top5) / n};
}

template <typename T>
Metrics Trainer<T>::evaluate(const Dataset& data) {
  return feedalign::evaluate(net_, data, hyper_.batch);
}

#define FEEDALIGN_INSTANTIATE(T)                                                                \
  template LossResult<T> softmax_cross_entropy(const Tensor<T>&, std::span<const std::int32_t>); \
  template std::size_t topk_hits(const Tensor<T>&, std::span<const std::int32_t>, std::size_t);  \
  template void sgd_momentum_step(std::span<Param<T>* const>, TrainState<T>&, double, double,    \
                                  double);                                                       \
  template class Trainer<T>;                                                                     \
  template Metrics evaluate(Network<T>&, const Dataset&, std::size_t);

FEEDALIGN_INSTANTIATE(float)
FEEDALIGN_INSTANTIATE(double)

#undef FEEDALIGN_INSTANTIATE

}  // namespace feedalign
