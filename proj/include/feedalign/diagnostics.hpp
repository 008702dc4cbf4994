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
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "feedalign/network.hpp"

namespace feedalign {

/// Central difference (L(θ+ε) − L(θ−ε)) / 2ε for each selected entry of
/// `param` (all entries when `entries` is empty; others are left 0).
/// ε must lie in [1e-7, 1e-3]; a non-finite loss raises NumericError.
template <typename T>
Tensor<T> finite_diff_gradient(const std::function<T()>& loss, Tensor<T>& param, double epsilon = 1e-5,
                               std::span<const std::size_t> entries = {});

/// |a − b| / max(|a|, |b|, floor).
double relative_error(double a, double b, double floor = 1e-6);

struct GradCheckEntry {
  std::string param;  // "<layer index>:<layer>.<param>"
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double worst_rel_error = 0.0;
  std::size_t worst = 0;
  bool passed(double tolerance) const { return worst_rel_error <= tolerance; }
};

/// Compares every parameter gradient of a BP backward pass on (x, labels)
/// against central differences of the mean cross-entropy in train mode.
/// `max_entries_per_param` caps the probed entries per tensor (evenly
/// strided; 0 = all). `corrupt_scale` != 1 multiplies the analytic gradient
/// of the first parameter, for fault-injection tests.
template <typename T>
GradCheckReport check_gradients(Network<T>& net, const Tensor<T>& x, std::span<const std::int32_t> labels,
                                double epsilon = 1e-5, std::size_t max_entries_per_param = 0,
                                double corrupt_scale = 1.0);

struct LayerAlignment {
  std::string layer;
  double cosine = 0.0;
  bool degenerate = false;  // a gradient had zero norm; cosine reported as 0
};

struct AlignmentReport {
  std::uint64_t step = 0;
  std::vector<LayerAlignment> layers;
};

/// dot / (|a|·|b|) over the flattened tensors; {0, true} if a norm is zero.
template <typename T>
LayerAlignment alignment(const std::vector<const Tensor<T>*>& grad_bp,
                         const std::vector<const Tensor<T>*>& grad_strategy);

/// Per-layer cosine between the true BP gradient and the gradient the
/// network's strategy produced for the same cached forward pass. The
/// strategy gradients are left in place afterwards.
template <typename T>
AlignmentReport measure_alignment(Network<T>& net, std::uint64_t step);

struct MemoryRow {
  std::string layer;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t stored_bytes = 0;   // as held by the network
  std::size_t dense32_bytes = 0;  // 32-bit dense baseline
  std::size_t packed_bytes = 0;   // 1 bit per entry
  double reduction = 0.0;         // 1 - packed / dense32
};

struct MemoryReport {
  std::vector<MemoryRow> feedback;
  std::vector<std::pair<std::string, std::size_t>> parameter_bytes;
  std::size_t total_feedback_bytes = 0;
};

template <typename T>
MemoryReport memory_report(Network<T>& net);

/// `value` in percent with one decimal, e.g. 0.96875 -> "96.9".
std::string format_percent(double fraction);

/// CSV with header `layer,metric,value`.
void write_memory_csv(std::ostream& os, const MemoryReport& report);
void write_gradcheck_csv(std::ostream& os, const GradCheckReport& report);

}  // namespace feedalign
