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

#include "feedalign/feedback.hpp"

#include <cmath>
#include <random>

#include "binary_io.hpp"

namespace feedalign {

std::string scheme_name(FeedbackScheme scheme) {
  switch (scheme) {
    case FeedbackScheme::kRandomUniform: return "random-uniform";
    case FeedbackScheme::kRandomHe: return "random";
    case FeedbackScheme::kProduct: return "product";
    case FeedbackScheme::kSignProduct: return "sign-product";
  }
  return "?";
}

template <typename T>
FeedbackMatrix<T>::FeedbackMatrix(Tensor<T> values, FeedbackOrigin origin)
    : values_(std::move(values)), origin_(origin) {
  if (values_.rank() != 2) {
    throw RankError("feedback matrix must be rank 2, got " + shape_str(values_.shape()));
  }
}

BinaryFeedbackMatrix::BinaryFeedbackMatrix(std::size_t rows, std::size_t cols,
                                           std::vector<std::uint8_t> bits)
    : rows_(rows), cols_(cols), bits_(std::move(bits)) {
  if (rows == 0 || cols == 0) throw DimensionError("binary feedback needs positive extents");
  if (bits_.size() != packed_size_bytes(rows, cols)) {
    throw DimensionError("binary feedback " + std::to_string(rows) + "x" + std::to_string(cols) +
                         " needs " + std::to_string(packed_size_bytes(rows, cols)) +
                         " bytes, got " + std::to_string(bits_.size()));
  }
  const std::size_t used = (rows * cols) % 8;
  if (used != 0 && (bits_.back() >> used) != 0) {
    throw FormatError("binary feedback has bits set past its last entry");
  }
}

template <typename T>
Tensor<T> BinaryFeedbackMatrix::expand() const {
  Tensor<T> out({rows_, cols_});
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) out.at(r, c) = positive(r, c) ? T(1) : T(-1);
  return out;
}

BinaryFeedbackMatrix BinaryFeedbackMatrix::negated() const {
  std::vector<std::uint8_t> flipped(bits_.size());
  for (std::size_t i = 0; i < bits_.size(); ++i) flipped[i] = static_cast<std::uint8_t>(~bits_[i]);
  // Keep the unused tail bits of the last byte cleared.
  const std::size_t used = (rows_ * cols_) & 7;
  if (used) flipped.back() &= static_cast<std::uint8_t>((1u << used) - 1);
  return BinaryFeedbackMatrix(rows_, cols_, std::move(flipped));
}

template <typename T>
FeedbackMatrix<T> build_random_feedback(std::size_t rows, std::size_t cols, FeedbackScheme scheme,
                                        std::uint64_t seed) {
  if (rows == 0 || cols == 0) {
    throw DimensionError("random feedback needs positive extents, got " + std::to_string(rows) +
                         "x" + std::to_string(cols));
  }
  std::mt19937_64 rng(seed);
  Tensor<T> values({rows, cols});
  switch (scheme) {
    case FeedbackScheme::kRandomUniform: {
      const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
      std::uniform_real_distribution<double> dist(-a, a);
      for (auto& v : values.values()) v = static_cast<T>(dist(rng));
      break;
    }
    case FeedbackScheme::kRandomHe: {
      std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(cols)));
      for (auto& v : values.values()) v = static_cast<T>(dist(rng));
      break;
    }
    default:
      throw ConfigError("scheme '" + scheme_name(scheme) + "' is not a random scheme");
  }
  return FeedbackMatrix<T>(std::move(values), FeedbackOrigin::kRandom);
}

template <typename T>
FeedbackMatrix<T> build_product_feedback(std::span<const Tensor<T>> chain) {
  if (chain.empty()) throw DimensionError("product feedback needs at least one weight");
  for (const auto& w : chain) {
    if (w.rank() != 2) throw RankError("product feedback: weight " + shape_str(w.shape()));
  }
  for (std::size_t k = 1; k < chain.size(); ++k) {
    if (chain[k].dim(1) != chain[k - 1].dim(0)) {
      throw DimensionError("product feedback: " + shape_str(chain[k].shape()) +
                           " cannot follow " + shape_str(chain[k - 1].shape()));
    }
  }
  // Multiply from the output side down: D = W_last · ... · W_first.
  Tensor<T> d = chain.back();
  for (std::size_t k = chain.size() - 1; k-- > 0;) d = matmul(d, chain[k]);
  return FeedbackMatrix<T>(transpose(d), FeedbackOrigin::kProduct);
}

template <typename T>
BinaryFeedbackMatrix binarize_sign(const FeedbackMatrix<T>& m) {
  const std::size_t rows = m.rows(), cols = m.cols();
  std::vector<std::uint8_t> bits(packed_size_bytes(rows, cols), 0);
  const auto values = m.values().values();
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] >= T(0)) bits[i >> 3] |= static_cast<std::uint8_t>(1u << (i & 7));
  }
  return BinaryFeedbackMatrix(rows, cols, std::move(bits));
}

namespace {

void require_error_width(const Shape& e, std::size_t width, const char* who) {
  if (e.size() != 2 || e[1] != width) {
    throw DimensionError(std::string(who) + ": error " + shape_str(e) + " needs width " +
                         std::to_string(width));
  }
}

template <typename T>
void require_fc_target(const Tensor<T>& fprime, const Tensor<T>& projected, const char* who) {
  if (fprime.rank() != 2) {
    throw DimensionError(std::string(who) + ": feedback targets fully-connected layers only, got " +
                         shape_str(fprime.shape()));
  }
  if (fprime.shape() != projected.shape()) {
    throw DimensionError(std::string(who) + ": f' " + shape_str(fprime.shape()) +
                         " does not match projected error " + shape_str(projected.shape()));
  }
}

}  // namespace

template <typename T>
Tensor<T> project_error(const FeedbackMatrix<T>& m, const Tensor<T>& error) {
  require_error_width(error.shape(), m.cols(), "feedback projection");
  return matmul_nt(error, m.values());
}

template <typename T>
Tensor<T> project_error(const BinaryFeedbackMatrix& m, const Tensor<T>& error) {
  require_error_width(error.shape(), m.cols(), "binary feedback projection");
  const std::size_t batch = error.dim(0), rows = m.rows(), cols = m.cols();
  Tensor<T> out({batch, rows});
  for (std::size_t b = 0; b < batch; ++b) {
    const T* e = error.data() + b * cols;
    for (std::size_t r = 0; r < rows; ++r) {
      T acc = T(0);
      std::size_t bit = r * cols;
      for (std::size_t c = 0; c < cols; ++c, ++bit) {
        if ((m.bits()[bit >> 3] >> (bit & 7)) & 1u) {
          acc += e[c];
        } else {
          acc -= e[c];
        }
      }
      out[b * rows + r] = acc;
    }
  }
  out.check_finite("binary feedback projection");
  return out;
}

template <typename T>
Tensor<T> fa_error(const FeedbackMatrix<T>& r, const Tensor<T>& e_next, const Tensor<T>& fprime) {
  Tensor<T> g = project_error(r, e_next);
  require_fc_target(fprime, g, "fa_error");
  return hadamard(g, fprime);
}

template <typename T>
Tensor<T> dfa_error(const FeedbackMatrix<T>& d, const Tensor<T>& e_last, const Tensor<T>& fprime) {
  Tensor<T> g = project_error(d, e_last);
  require_fc_target(fprime, g, "dfa_error");
  return hadamard(g, fprime);
}

template <typename T>
Tensor<T> bdfa_error(const BinaryFeedbackMatrix& b, const Tensor<T>& e_last,
                     const Tensor<T>& fprime) {
  Tensor<T> g = project_error<T>(b, e_last);
  require_fc_target(fprime, g, "bdfa_error");
  return hadamard(g, fprime);
}

std::size_t packed_size_bytes(std::size_t rows, std::size_t cols) { return (rows * cols + 7) / 8; }

std::size_t packed_size_bytes(const BinaryFeedbackMatrix& m) {
  return packed_size_bytes(m.rows(), m.cols());
}

std::size_t dense_size_bytes(std::size_t rows, std::size_t cols, std::size_t scalar_bytes) {
  return rows * cols * scalar_bytes;
}

template <typename T>
void write_feedback(std::ostream& os, const FeedbackMatrix<T>& m) {
  io::put<std::uint8_t>(os, 0);
  io::put_u32(os, m.rows());
  io::put_u32(os, m.cols());
  io::put_span(os, m.values().values());
}

void write_feedback(std::ostream& os, const BinaryFeedbackMatrix& m) {
  io::put<std::uint8_t>(os, 1);
  io::put_u32(os, m.rows());
  io::put_u32(os, m.cols());
  io::put_span(os, std::span<const std::uint8_t>(m.bits()));
}

#define FEEDALIGN_INSTANTIATE(T)                                                                \
  template class FeedbackMatrix<T>;                                                             \
  template Tensor<T> BinaryFeedbackMatrix::expand<T>() const;                                   \
  template FeedbackMatrix<T> build_random_feedback<T>(std::size_t, std::size_t, FeedbackScheme, \
                                                      std::uint64_t);                           \
  template FeedbackMatrix<T> build_product_feedback<T>(std::span<const Tensor<T>>);             \
  template BinaryFeedbackMatrix binarize_sign(const FeedbackMatrix<T>&);                        \
  template Tensor<T> project_error(const FeedbackMatrix<T>&, const Tensor<T>&);                 \
  template Tensor<T> project_error<T>(const BinaryFeedbackMatrix&, const Tensor<T>&);           \
  template Tensor<T> fa_error(const FeedbackMatrix<T>&, const Tensor<T>&, const Tensor<T>&);    \
  template Tensor<T> dfa_error(const FeedbackMatrix<T>&, const Tensor<T>&, const Tensor<T>&);   \
  template Tensor<T> bdfa_error(const BinaryFeedbackMatrix&, const Tensor<T>&,                  \
                                const Tensor<T>&);                                              \
  template void write_feedback(std::ostream&, const FeedbackMatrix<T>&);

FEEDALIGN_INSTANTIATE(float)
FEEDALIGN_INSTANTIATE(double)

#undef FEEDALIGN_INSTANTIATE

}  // namespace feedalign
