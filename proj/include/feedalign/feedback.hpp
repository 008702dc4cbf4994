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

// Fixed feedback matrices used in place of transposed forward weights when
// propagating errors.
//
// A feedback matrix for a hidden layer of width N_i that receives an error of
// width N_t (N_t = N_L for direct feedback, N_{i+1} for layer-wise feedback)
// is stored "transposed-ready" as [N_i x N_t]: row r holds the weights that
// project the incoming error onto hidden unit r. The projected signal is
//
//     g[b][r] = sum_j e[b][j] * S[r][j]      (j ascending, accumulator from 0)
//
// and the layer error is g ⊙ f'. Once built, a matrix never changes.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "feedalign/tensor.hpp"

namespace feedalign {

enum class FeedbackScheme : std::uint8_t {
  kRandomUniform = 0,  // U[-a, a], a = sqrt(6 / (rows + cols))
  kRandomHe = 1,       // N(0, 2 / cols)
  kProduct = 2,        // product of the initial forward weights above the layer
  kSignProduct = 3,    // sign of that product
};

std::string scheme_name(FeedbackScheme scheme);

struct FeedbackInit {
  FeedbackScheme scheme = FeedbackScheme::kRandomHe;
  std::uint64_t seed = 0;
};

enum class FeedbackOrigin : std::uint8_t { kRandom = 0, kProduct = 1 };

template <typename T>
class FeedbackMatrix {
 public:
  FeedbackMatrix(Tensor<T> values, FeedbackOrigin origin);

  const Tensor<T>& values() const { return values_; }
  std::size_t rows() const { return values_.dim(0); }
  std::size_t cols() const { return values_.dim(1); }
  FeedbackOrigin origin() const { return origin_; }
  bool frozen() const { return true; }

 private:
  Tensor<T> values_;
  FeedbackOrigin origin_;
};

/// ±1 matrix, one bit per entry (set ⇔ +1), row-major, LSB-first per byte,
/// rows packed back to back with no per-row padding.
class BinaryFeedbackMatrix {
 public:
  BinaryFeedbackMatrix(std::size_t rows, std::size_t cols, std::vector<std::uint8_t> bits);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  const std::vector<std::uint8_t>& bits() const { return bits_; }

  bool positive(std::size_t r, std::size_t c) const {
    const std::size_t i = r * cols_ + c;
    return (bits_[i >> 3] >> (i & 7)) & 1u;
  }
  int sign(std::size_t r, std::size_t c) const { return positive(r, c) ? 1 : -1; }

  /// Dense ±1 tensor with the same logical entries.
  template <typename T>
  Tensor<T> expand() const;

  BinaryFeedbackMatrix negated() const;

  bool operator==(const BinaryFeedbackMatrix&) const = default;

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<std::uint8_t> bits_;
};

/// Seeded i.i.d. draw for the random schemes.
template <typename T>
FeedbackMatrix<T> build_random_feedback(std::size_t rows, std::size_t cols, FeedbackScheme scheme,
                                        std::uint64_t seed);

/// `chain` holds forward weights [out x in] ordered from the layer directly
/// above the target up to the output layer. Returns the transposed-ready
/// form of W_last ··· W_first, so that projecting e_L through it equals
/// pushing e_L back through every transposed weight in turn.
template <typename T>
FeedbackMatrix<T> build_product_feedback(std::span<const Tensor<T>> chain);

/// +1 where value >= 0, else -1.
template <typename T>
BinaryFeedbackMatrix binarize_sign(const FeedbackMatrix<T>& m);

/// e · Sᵀ (the error projected onto the hidden units).
template <typename T>
Tensor<T> project_error(const FeedbackMatrix<T>& m, const Tensor<T>& error);
/// Same projection using add/subtract accumulation over the packed signs.
template <typename T>
Tensor<T> project_error(const BinaryFeedbackMatrix& m, const Tensor<T>& error);

/// Layer-wise feedback: (e_next · Rᵀ) ⊙ f'.
template <typename T>
Tensor<T> fa_error(const FeedbackMatrix<T>& r, const Tensor<T>& e_next, const Tensor<T>& fprime);

/// Direct feedback from the output error: (e_L · Dᵀ) ⊙ f'.
template <typename T>
Tensor<T> dfa_error(const FeedbackMatrix<T>& d, const Tensor<T>& e_last, const Tensor<T>& fprime);

/// Binary direct feedback: (e_L · Bᵀ) ⊙ f' with B ∈ {±1}.
template <typename T>
Tensor<T> bdfa_error(const BinaryFeedbackMatrix& b, const Tensor<T>& e_last,
                     const Tensor<T>& fprime);

std::size_t packed_size_bytes(const BinaryFeedbackMatrix& m);
std::size_t packed_size_bytes(std::size_t rows, std::size_t cols);
std::size_t dense_size_bytes(std::size_t rows, std::size_t cols, std::size_t scalar_bytes = 4);

/// Checkpoint section: tag u8 (0 dense, 1 packed), rows u32, cols u32, then
/// little-endian values or the packed bytes.
template <typename T>
void write_feedback(std::ostream& os, const FeedbackMatrix<T>& m);
void write_feedback(std::ostream& os, const BinaryFeedbackMatrix& m);

}  // namespace feedalign
