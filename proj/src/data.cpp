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

#include "feedalign/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <ostream>

#include "feedalign/random.hpp"

namespace feedalign {

void Dataset::validate() const {
  if (sample_shape.empty()) throw DataError("dataset '" + name + "': empty sample shape");
  if (features.size() != labels.size() * sample_size()) {
    throw DataError("dataset '" + name + "': " + std::to_string(features.size()) +
                    " feature values do not match " + std::to_string(labels.size()) +
                    " samples of " + shape_str(sample_shape));
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= class_count) {
      throw DataError("dataset '" + name + "': label " + std::to_string(labels[i]) +
                      " at sample " + std::to_string(i) + " outside [0, " +
                      std::to_string(class_count) + ")");
    }
  }
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out{name, sample_shape, {}, {}, class_count};
  const std::size_t d = sample_size();
  out.features.reserve(indices.size() * d);
  out.labels.reserve(indices.size());
  for (auto i : indices) {
    if (i >= size()) throw DataError("dataset '" + name + "': index " + std::to_string(i) + " out of range");
    out.features.insert(out.features.end(), features.begin() + static_cast<std::ptrdiff_t>(i * d),
                        features.begin() + static_cast<std::ptrdiff_t>((i + 1) * d));
    out.labels.push_back(labels[i]);
  }
  return out;
}

Dataset Dataset::head(std::size_t n) const {
  std::vector<std::size_t> idx(std::min(n, size()));
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return subset(idx);
}

template <typename T>
Tensor<T> gather_features(const Dataset& data, std::span<const std::size_t> indices) {
  if (indices.empty()) throw DataError("cannot gather an empty batch");
  Shape shape = data.sample_shape;
  shape.insert(shape.begin(), indices.size());
  Tensor<T> out(shape);
  const std::size_t d = data.sample_size();
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const float* src = data.features.data() + indices[b] * d;
    T* dst = out.data() + b * d;
    for (std::size_t j = 0; j < d; ++j) dst[j] = static_cast<T>(src[j]);
  }
  return out;
}

std::vector<std::int32_t> gather_labels(const Dataset& data, std::span<const std::size_t> indices) {
  std::vector<std::int32_t> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(data.labels.at(i));
  return out;
}

namespace {

Dataset load_cifar(const std::filesystem::path& file, std::size_t label_bytes,
                   std::size_t classes, std::size_t expected_records, const std::string& name) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw DataError("cannot open CIFAR file " + file.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  const std::size_t record = label_bytes + kCifarPixels;
  if (expected_records != 0 && bytes.size() != expected_records * record) {
    throw FormatError(file.string() + ": expected " + std::to_string(expected_records * record) +
                      " bytes (" + std::to_string(expected_records) + " records of " +
                      std::to_string(record) + "), got " + std::to_string(bytes.size()));
  }
  if (bytes.empty() || bytes.size() % record != 0) {
    throw FormatError(file.string() + ": expected a positive multiple of " +
                      std::to_string(record) + " bytes, got " + std::to_string(bytes.size()));
  }
  const std::size_t n = bytes.size() / record;
  Dataset out{name, {3, 32, 32}, std::vector<float>(n * kCifarPixels), std::vector<std::int32_t>(n),
              classes};
  for (std::size_t r = 0; r < n; ++r) {
    const unsigned char* rec = bytes.data() + r * record;
    const unsigned label = rec[label_bytes - 1];
    if (label >= classes) {
      throw FormatError(file.string() + ": record " + std::to_string(r) + " has label " +
                        std::to_string(label) + " >= " + std::to_string(classes));
    }
    out.labels[r] = static_cast<std::int32_t>(label);
    float* dst = out.features.data() + r * kCifarPixels;
    for (std::size_t p = 0; p < kCifarPixels; ++p) {
      dst[p] = static_cast<float>(rec[label_bytes + p]) / 255.0f;
    }
  }
  return out;
}

void append(Dataset& into, const Dataset& part) {
  into.features.insert(into.features.end(), part.features.begin(), part.features.end());
  into.labels.insert(into.labels.end(), part.labels.begin(), part.labels.end());
}

}  // namespace

Dataset load_cifar10(const std::filesystem::path& file, std::size_t expected_records) {
  return load_cifar(file, 1, 10, expected_records, "cifar10");
}

Dataset load_cifar100(const std::filesystem::path& file, std::size_t expected_records) {
  return load_cifar(file, 2, 100, expected_records, "cifar100");
}

Dataset load_cifar10_split(const std::filesystem::path& dir, Split split) {
  if (split == Split::kTest) {
    auto d = load_cifar10(dir / "test_batch.bin", kCifarBatchRecords);
    d.name = "cifar10-test";
    return d;
  }
  Dataset out{"cifar10-train", {3, 32, 32}, {}, {}, 10};
  for (int i = 1; i <= 5; ++i) {
    append(out, load_cifar10(dir / ("data_batch_" + std::to_string(i) + ".bin"), kCifarBatchRecords));
  }
  return out;
}

Dataset load_cifar100_split(const std::filesystem::path& dir, Split split) {
  const bool train = split == Split::kTrain;
  auto d = load_cifar100(dir / (train ? "train.bin" : "test.bin"),
                         train ? 5 * kCifarBatchRecords : kCifarBatchRecords);
  d.name = train ? "cifar100-train" : "cifar100-test";
  return d;
}

ChannelStats channel_stats(const Dataset& data) {
  const std::size_t channels = data.sample_shape.at(0);
  const std::size_t spatial = data.sample_size() / channels;
  ChannelStats stats{std::vector<float>(channels), std::vector<float>(channels)};
  for (std::size_t c = 0; c < channels; ++c) {
    double acc = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const float* p = data.features.data() + (i * channels + c) * spatial;
      for (std::size_t j = 0; j < spatial; ++j) {
        acc += p[j];
        sq += static_cast<double>(p[j]) * p[j];
      }
    }
    const double count = static_cast<double>(data.size() * spatial);
    const double mean = acc / count;
    stats.mean[c] = static_cast<float>(mean);
    stats.stddev[c] = static_cast<float>(std::sqrt(std::max(0.0, sq / count - mean * mean)));
  }
  return stats;
}

void standardize(Dataset& data, const ChannelStats& stats) {
  const std::size_t channels = data.sample_shape.at(0);
  if (stats.mean.size() != channels || stats.stddev.size() != channels) {
    throw DataError("standardize: stats for " + std::to_string(stats.mean.size()) +
                    " channels applied to " + std::to_string(channels));
  }
  const std::size_t spatial = data.sample_size() / channels;
  for (std::size_t i = 0; i < data.size(); ++i)
    for (std::size_t c = 0; c < channels; ++c) {
      const float sd = stats.stddev[c] > 0.0f ? stats.stddev[c] : 1.0f;
      float* p = data.features.data() + (i * channels + c) * spatial;
      for (std::size_t j = 0; j < spatial; ++j) p[j] = (p[j] - stats.mean[c]) / sd;
    }
}

template <typename T>
void hflip_image(Tensor<T>& batch, std::size_t index) {
  const std::size_t c = batch.dim(1), h = batch.dim(2), w = batch.dim(3);
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < h; ++y) {
      T* row = &batch.at(index, ch, y, 0);
      std::reverse(row, row + w);
    }
}

template <typename T>
void crop_image(Tensor<T>& batch, std::size_t index, std::size_t pad, std::size_t dy,
                std::size_t dx) {
  if (dy > 2 * pad || dx > 2 * pad) throw GeometryError("crop offset outside the padded image");
  const std::size_t c = batch.dim(1), h = batch.dim(2), w = batch.dim(3);
  std::vector<T> out(c * h * w, T(0));
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < h; ++y) {
      const long sy = static_cast<long>(y + dy) - static_cast<long>(pad);
      if (sy < 0 || sy >= static_cast<long>(h)) continue;
      for (std::size_t x = 0; x < w; ++x) {
        const long sx = static_cast<long>(x + dx) - static_cast<long>(pad);
        if (sx < 0 || sx >= static_cast<long>(w)) continue;
        out[(ch * h + y) * w + x] =
            batch.at(index, ch, static_cast<std::size_t>(sy), static_cast<std::size_t>(sx));
      }
    }
  std::copy(out.begin(), out.end(), &batch.at(index, 0, 0, 0));
}

template <typename T>
void augment(Tensor<T>& batch, const AugmentPolicy& policy, std::mt19937_64& rng) {
  if (!policy.enabled || batch.rank() != 4) return;
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> offset(0, 2 * policy.crop_pad);
  for (std::size_t i = 0; i < batch.dim(0); ++i) {
    if (coin(rng) < policy.hflip_prob) hflip_image(batch, i);
    if (policy.crop_pad > 0) {
      const std::size_t dy = offset(rng), dx = offset(rng);
      crop_image(batch, i, policy.crop_pad, dy, dx);
    }
  }
}

Dataset two_moons(std::size_t n, double noise_std, std::uint64_t seed) {
  if (n < 2) throw DataError("two_moons needs n >= 2");
  const std::size_t outer = (n + 1) / 2, inner = n / 2;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, noise_std > 0 ? noise_std : 1.0);
  Dataset out{"two-moons", {2}, {}, {}, 2};
  auto add = [&](double x, double y, int label) {
    if (noise_std > 0) {
      x += noise(rng);
      y += noise(rng);
    }
    out.features.push_back(static_cast<float>(x));
    out.features.push_back(static_cast<float>(y));
    out.labels.push_back(label);
  };
  for (std::size_t i = 0; i < outer; ++i) {
    const double t = outer > 1 ? std::numbers::pi * static_cast<double>(i) / static_cast<double>(outer - 1) : 0.0;
    add(std::cos(t), std::sin(t), 0);
  }
  for (std::size_t i = 0; i < inner; ++i) {
    const double t = inner > 1 ? std::numbers::pi * static_cast<double>(i) / static_cast<double>(inner - 1) : 0.0;
    add(1.0 - std::cos(t), 0.5 - std::sin(t), 1);
  }
  return out;
}

Dataset gaussian_blobs(std::size_t n, std::size_t k, double spread, std::uint64_t seed) {
  if (n < 2) throw DataError("gaussian_blobs needs n >= 2");
  if (k < 1) throw DataError("gaussian_blobs needs k >= 1");
  if (!(spread > 0)) throw DataError("gaussian_blobs needs spread > 0");
  const double radius = k > 1 ? 3.0 * spread / std::sin(std::numbers::pi / static_cast<double>(k)) : 0.0;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, spread);
  Dataset out{"gaussian-blobs", {2}, {}, {}, k};
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t label = i % k;
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(label) / static_cast<double>(k);
    out.features.push_back(static_cast<float>(radius * std::cos(angle) + noise(rng)));
    out.features.push_back(static_cast<float>(radius * std::sin(angle) + noise(rng)));
    out.labels.push_back(static_cast<std::int32_t>(label));
  }
  return out;
}

std::vector<std::vector<std::size_t>> batches(std::size_t n, std::size_t batch,
                                              std::uint64_t seed, std::uint64_t epoch) {
  if (n == 0) throw DataError("cannot batch an empty dataset");
  if (batch == 0) throw DataError("batch size must be >= 1");
  if (batch > n) {
    throw DataError("batch size " + std::to_string(batch) + " exceeds dataset size " +
                    std::to_string(n));
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(derive_seed(seed, epoch));
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t lo = 0; lo < n; lo += batch) {
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(lo),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(n, lo + batch)));
  }
  return out;
}

void write_csv(std::ostream& os, const Dataset& data) {
  const std::size_t d = data.sample_size();
  os << "label";
  for (std::size_t j = 0; j < d; ++j) os << ",x" << j;
  os << '\n';
  char buf[32];
  for (std::size_t i = 0; i < data.size(); ++i) {
    os << data.labels[i];
    for (std::size_t j = 0; j < d; ++j) {
      std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(data.features[i * d + j]));
      os << ',' << buf;
    }
    os << '\n';
  }
}

#define FEEDALIGN_INSTANTIATE(T)                                                          \
  template Tensor<T> gather_features<T>(const Dataset&, std::span<const std::size_t>);    \
  template void augment(Tensor<T>&, const AugmentPolicy&, std::mt19937_64&);              \
  template void hflip_image(Tensor<T>&, std::size_t);                                     \
  template void crop_image(Tensor<T>&, std::size_t, std::size_t, std::size_t, std::size_t);

FEEDALIGN_INSTANTIATE(float)
FEEDALIGN_INSTANTIATE(double)

#undef FEEDALIGN_INSTANTIATE

}  // namespace feedalign
