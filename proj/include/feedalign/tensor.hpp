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

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "feedalign/errors.hpp"

namespace feedalign {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);
std::size_t shape_size(const Shape& shape);

/// Dense row-major n-dimensional array. Instantiated for float and double.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0));
  Tensor(Shape shape, std::vector<T> values);

  static Tensor identity(std::size_t n);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  bool empty() const { return data_.empty(); }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  const T& at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
  T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }
  const T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }

  /// Same values, new shape; sizes must agree.
  Tensor reshaped(Shape shape) const;
  void fill(T v);

  /// Throws NumericError naming `what` if any entry is NaN or infinite.
  void check_finite(std::string_view what) const;

  bool operator==(const Tensor& other) const = default;

 private:
  Shape shape_;
  std::vector<T> data_;
};

struct Conv2dGeometry {
  std::size_t stride = 1;
  std::size_t pad = 0;
};

/// Output extent of a strided window, or GeometryError if non-positive.
std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                               std::size_t pad);

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

/// a · bᵀ without materializing the transpose.
template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> transpose(const Tensor<T>& a);

template <typename T>
Tensor<T> hadamard(const Tensor<T>& a, const Tensor<T>& b);

/// Cross-correlation of input [N×C×H×W] with kernel [O×C×kh×kw], zero
/// padding. Every output element is accumulated from 0 over c, then kh,
/// then kw (kw innermost).
template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const Tensor<T>& kernel, Conv2dGeometry geo);

/// Adjoint of conv2d_forward w.r.t. its input: full correlation of the error
/// with the 180° rotated, channel-transposed kernel.
template <typename T>
Tensor<T> conv2d_backward_data(const Tensor<T>& error_out, const Tensor<T>& kernel,
                               Conv2dGeometry geo, std::size_t in_h, std::size_t in_w);

/// Adjoint w.r.t. the kernel, summed over the batch in sample order.
template <typename T>
Tensor<T> conv2d_backward_kernel(const Tensor<T>& input, const Tensor<T>& error_out,
                                 Conv2dGeometry geo, std::size_t kernel_h, std::size_t kernel_w);

template <typename T>
T dot(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
T sum(const Tensor<T>& a);

}  // namespace feedalign
