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

#include "feedalign/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "feedalign/trainer.hpp"

namespace feedalign {

template <typename T>
Tensor<T> finite_diff_gradient(const std::function<T()>& loss, Tensor<T>& param, double epsilon,
                               std::span<const std::size_t> entries) {
  if (!(epsilon >= 1e-7 && epsilon <= 1e-3)) {
    throw ConfigError("finite-difference epsilon must lie in [1e-7, 1e-3]");
  }
  std::vector<std::size_t> all;
  if (entries.empty()) {
    all.resize(param.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    entries = all;
  }
  Tensor<T> grad(param.shape());
  const T eps = static_cast<T>(epsilon);
  for (auto i : entries) {
    const T saved = param[i];
    param[i] = saved + eps;
    const T up = loss();
    param[i] = saved - eps;
    const T down = loss();
    param[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericError("finite difference: non-finite loss at entry " + std::to_string(i));
    }
    grad[i] = (up - down) / (T(2) * eps);
  }
  return grad;
}

double relative_error(double a, double b, double floor) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

template <typename T>
GradCheckReport check_gradients(Network<T>& net, const Tensor<T>& x, std::span<const std::int32_t> labels,
                                double epsilon, std::size_t max_entries_per_param,
                                double corrupt_scale) {
  // Buffers (BN running stats) move on every train-mode forward; restore them.
  std::vector<Tensor<T>> buffers;
  for (auto& layer : net.layers())
    for (auto* t : layer->persistent()) buffers.push_back(*t);

  constexpr std::uint64_t kMaskSeed = 0x5eed;
  auto loss = [&]() -> T {
    std::mt19937_64 rng(kMaskSeed);
    const Tensor<T> logits = net.forward(x, ForwardContext{Mode::kTrain, &rng});
    return softmax_cross_entropy<T>(logits, labels).loss;
  };
  {
    std::mt19937_64 rng(kMaskSeed);
    const Tensor<T> logits = net.forward(x, ForwardContext{Mode::kTrain, &rng});
    net.backward(softmax_cross_entropy<T>(logits, labels).error, Strategy::kBP);
  }

  GradCheckReport report;
  std::size_t p_index = 0;
  for (std::size_t li = 0; li < net.layers().size(); ++li) {
    auto& layer = net.layers()[li];
    for (auto* p : layer->params()) {
      Tensor<T> analytic = p->grad;
      if (p_index == 0 && corrupt_scale != 1.0) {
        for (auto& v : analytic.values()) v *= static_cast<T>(corrupt_scale);
      }
      std::vector<std::size_t> picks;
      const std::size_t n = p->value.size();
      const std::size_t take = max_entries_per_param == 0 ? n : std::min(n, max_entries_per_param);
      for (std::size_t j = 0; j < take; ++j) picks.push_back(j * n / take);
      const Tensor<T> numeric = finite_diff_gradient<T>(loss, p->value, epsilon, picks);
      const std::string name = std::to_string(li) + ":" + layer->describe() + "." + p->name;
      for (auto j : picks) {
        GradCheckEntry e{name, j, static_cast<double>(analytic[j]), static_cast<double>(numeric[j]), 0.0};
        e.rel_error = relative_error(e.analytic, e.numeric);
        if (e.rel_error > report.worst_rel_error || report.entries.empty()) {
          report.worst_rel_error = std::max(report.worst_rel_error, e.rel_error);
          report.worst = report.entries.size();
        }
        report.entries.push_back(std::move(e));
      }
      ++p_index;
    }
  }

  std::size_t b = 0;
  for (auto& layer : net.layers())
    for (auto* t : layer->persistent()) *t = buffers[b++];
  return report;
}

template <typename T>
LayerAlignment alignment(const std::vector<const Tensor<T>*>& grad_bp,
                         const std::vector<const Tensor<T>*>& grad_strategy) {
  if (grad_bp.size() != grad_strategy.size()) {
    throw DimensionError("alignment: " + std::to_string(grad_bp.size()) + " vs " +
                         std::to_string(grad_strategy.size()) + " gradient tensors");
  }
  double dot_ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < grad_bp.size(); ++i) {
    const auto& a = *grad_bp[i];
    const auto& b = *grad_strategy[i];
    if (a.shape() != b.shape()) {
      throw DimensionError("alignment: gradient shapes differ " + shape_str(a.shape()) + " vs " +
                           shape_str(b.shape()));
    }
    for (std::size_t j = 0; j < a.size(); ++j) {
      dot_ab += static_cast<double>(a[j]) * b[j];
      aa += static_cast<double>(a[j]) * a[j];
      bb += static_cast<double>(b[j]) * b[j];
    }
  }
  if (aa == 0.0 || bb == 0.0) return {"", 0.0, true};
  const double c = dot_ab / (std::sqrt(aa) * std::sqrt(bb));
  return {"", std::clamp(c, -1.0, 1.0), false};
}

template <typename T>
AlignmentReport measure_alignment(Network<T>& net, std::uint64_t step) {
  if (net.fc_errors().empty()) throw StateError("alignment: no backward pass to compare against");
  const Tensor<T> e_last = net.fc_errors().back();
  auto params = net.params();
  std::vector<Tensor<T>> strategy_grads;
  for (auto* p : params) strategy_grads.push_back(p->grad);

  net.backward(e_last, Strategy::kBP);

  AlignmentReport report{step, {}};
  std::size_t p_index = 0;
  for (std::size_t li = 0; li < net.layers().size(); ++li) {
    auto layer_params = net.layers()[li]->params();
    if (layer_params.empty()) continue;
    std::vector<const Tensor<T>*> bp, st;
    for (auto* p : layer_params) {
      bp.push_back(&p->grad);
      st.push_back(&strategy_grads[p_index++]);
    }
    auto a = alignment<T>(bp, st);
    a.layer = std::to_string(li) + ":" + net.layers()[li]->describe();
    report.layers.push_back(std::move(a));
  }
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->grad = strategy_grads[i];
  return report;
}

template <typename T>
MemoryReport memory_report(Network<T>& net) {
  MemoryReport report;
  for (std::size_t k = 0; k < net.feedback().size(); ++k) {
    const auto& slot = net.feedback()[k];
    MemoryRow row;
    row.layer = "fc" + std::to_string(k + 1);
    if (const auto* d = std::get_if<FeedbackMatrix<T>>(&slot)) {
      row.rows = d->rows();
      row.cols = d->cols();
      row.stored_bytes = dense_size_bytes(row.rows, row.cols, sizeof(T));
    } else if (const auto* b = std::get_if<BinaryFeedbackMatrix>(&slot)) {
      row.rows = b->rows();
      row.cols = b->cols();
      row.stored_bytes = packed_size_bytes(*b);
    } else {
      continue;
    }
    row.dense32_bytes = dense_size_bytes(row.rows, row.cols, 4);
    row.packed_bytes = packed_size_bytes(row.rows, row.cols);
    row.reduction = 1.0 - static_cast<double>(row.packed_bytes) / static_cast<double>(row.dense32_bytes);
    report.total_feedback_bytes += row.stored_bytes;
    report.feedback.push_back(row);
  }
  for (std::size_t li = 0; li < net.layers().size(); ++li) {
    std::size_t bytes = 0;
    for (auto* p : net.layers()[li]->params()) bytes += p->value.size() * sizeof(T);
    if (bytes) report.parameter_bytes.emplace_back(std::to_string(li) + ":" + net.layers()[li]->describe(), bytes);
  }
  return report;
}

std::string format_percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", 100.0 * fraction);
  return buf;
}

void write_memory_csv(std::ostream& os, const MemoryReport& report) {
  os << "layer,metric,value\n";
  for (const auto& [layer, bytes] : report.parameter_bytes) os << layer << ",parameter_bytes," << bytes << '\n';
  for (const auto& r : report.feedback) {
    os << r.layer << ",feedback_rows," << r.rows << '\n';
    os << r.layer << ",feedback_cols," << r.cols << '\n';
    os << r.layer << ",feedback_stored_bytes," << r.stored_bytes << '\n';
    os << r.layer << ",feedback_dense32_bytes," << r.dense32_bytes << '\n';
    os << r.layer << ",feedback_packed_bytes," << r.packed_bytes << '\n';
    os << r.layer << ",reduction_pct," << format_percent(r.reduction) << '\n';
  }
  os << "total,feedback_stored_bytes," << report.total_feedback_bytes << '\n';
}

void write_gradcheck_csv(std::ostream& os, const GradCheckReport& report) {
  os << "layer,metric,value\n";
  char buf[64];
  for (const auto& e : report.entries) {
    const std::string id = e.param + "[" + std::to_string(e.index) + "]";
    std::snprintf(buf, sizeof buf, "%.17g", e.analytic);
    os << id << ",analytic," << buf << '\n';
    std::snprintf(buf, sizeof buf, "%.17g", e.numeric);
    os << id << ",numeric," << buf << '\n';
    std::snprintf(buf, sizeof buf, "%.6e", e.rel_error);
    os << id << ",rel_error," << buf << '\n';
  }
}

#define FEEDALIGN_INSTANTIATE(T)                                                                    \
  template Tensor<T> finite_diff_gradient(const std::function<T()>&, Tensor<T>&, double,            \
                                          std::span<const std::size_t>);                           \
  template GradCheckReport check_gradients(Network<T>&, const Tensor<T>&,                          \
                                           std::span<const std::int32_t>, double, std::size_t,     \
                                           double);                                                 \
  template LayerAlignment alignment(const std::vector<const Tensor<T>*>&,                          \
                                    const std::vector<const Tensor<T>*>&);                         \
  template AlignmentReport measure_alignment(Network<T>&, std::uint64_t);                          \
  template MemoryReport memory_report(Network<T>&);

FEEDALIGN_INSTANTIATE(float)
FEEDALIGN_INSTANTIATE(double)

#undef FEEDALIGN_INSTANTIATE

}  // namespace feedalign
