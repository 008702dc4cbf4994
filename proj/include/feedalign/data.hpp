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
#include <filesystem>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "feedalign/tensor.hpp"

namespace feedalign {

/// Labeled samples stored as 32-bit floats, one sample per row.
struct Dataset {
  std::string name;
  Shape sample_shape;  // {D} for points, {C, H, W} for images
  std::vector<float> features;
  std::vector<std::int32_t> labels;
  std::size_t class_count = 0;

  std::size_t size() const { return labels.size(); }
  std::size_t sample_size() const { return shape_size(sample_shape); }
  /// DataError unless N matches the feature count and every label is in range.
  void validate() const;
  Dataset subset(std::span<const std::size_t> indices) const;
  Dataset head(std::size_t n) const;
};

/// Stacks the selected samples into a [B x sample_shape...] tensor.
template <typename T>
Tensor<T> gather_features(const Dataset& data, std::span<const std::size_t> indices);
std::vector<std::int32_t> gather_labels(const Dataset& data, std::span<const std::size_t> indices);

// CIFAR binary layout: per record label byte(s) then 3072 pixel bytes
// (R, G, B planes of 32x32, row-major). Pixels decode to p / 255.
inline constexpr std::size_t kCifarPixels = 3 * 32 * 32;
inline constexpr std::size_t kCifarBatchRecords = 10000;

/// One CIFAR-10 file. `expected_records` == 0 accepts any whole number of
/// records; otherwise the size must match exactly.
Dataset load_cifar10(const std::filesystem::path& file, std::size_t expected_records = 0);
/// One CIFAR-100 file; keeps the fine label (100 classes).
Dataset load_cifar100(const std::filesystem::path& file, std::size_t expected_records = 0);

enum class Split { kTrain, kTest };
/// data_batch_{1..5}.bin or test_batch.bin under `dir`.
Dataset load_cifar10_split(const std::filesystem::path& dir, Split split);
/// train.bin (50000 records) or test.bin (10000) under `dir`.
Dataset load_cifar100_split(const std::filesystem::path& dir, Split split);

struct ChannelStats {
  std::vector<float> mean;
  std::vector<float> stddev;
};
ChannelStats channel_stats(const Dataset& data);
void standardize(Dataset& data, const ChannelStats& stats);

struct AugmentPolicy {
  double hflip_prob = 0.5;
  std::size_t crop_pad = 4;
  bool enabled = false;
};

/// Per image: horizontal flip with probability hflip_prob, then zero-pad by
/// crop_pad and crop a uniformly placed H x W window. Identity if disabled.
template <typename T>
void augment(Tensor<T>& batch, const AugmentPolicy& policy, std::mt19937_64& rng);

template <typename T>
void hflip_image(Tensor<T>& batch, std::size_t index);
/// Shifts image `index` so that the window at (dy, dx) of its zero-padded
/// version becomes the image; dy, dx ∈ [0, 2·pad].
template <typename T>
void crop_image(Tensor<T>& batch, std::size_t index, std::size_t pad, std::size_t dy,
                std::size_t dx);

/// Two interleaving half circles in 2-D; class 0 gets ceil(n/2) points.
Dataset two_moons(std::size_t n, double noise_std, std::uint64_t seed);
/// k isotropic 2-D Gaussian clusters with per-axis std `spread`, centres on a
/// circle with adjacent centres 6·spread apart; label i % k.
Dataset gaussian_blobs(std::size_t n, std::size_t k, double spread, std::uint64_t seed);

/// Per-epoch permutation of [0, n) from (seed, epoch), cut into batches of
/// `batch`; the final short batch is kept.
std::vector<std::vector<std::size_t>> batches(std::size_t n, std::size_t batch,
                                              std::uint64_t seed, std::uint64_t epoch);

/// `label,x0,x1,...` rows with a header line.
void write_csv(std::ostream& os, const Dataset& data);

}  // namespace feedalign
