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

#include "feedalign/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "feedalign/parallel.hpp"

namespace feedalign {

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill) : shape_(std::move(shape)) {
  for (auto d : shape_) {
    if (d == 0) throw DimensionError("tensor extents must be positive, got " + shape_str(shape_));
  }
  data_.assign(shape_size(shape_), fill);
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
  for (auto d : shape_) {
    if (d == 0) throw DimensionError("tensor extents must be positive, got " + shape_str(shape_));
  }
  if (shape_size(shape_) != data_.size()) {
    throw DimensionError("shape " + shape_str(shape_) + " does not hold " +
                         std::to_string(data_.size()) + " values");
  }
}

template <typename T>
Tensor<T> Tensor<T>::identity(std::size_t n) {
  Tensor out({n, n});
  for (std::size_t i = 0; i < n; ++i) out.at(i, i) = T(1);
  return out;
}

template <typename T>
Tensor<T> Tensor<T>::reshaped(Shape shape) const {
  if (shape_size(shape) != data_.size()) {
    throw DimensionError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
  }
  return Tensor(std::move(shape), data_);
}

template <typename T>
void Tensor<T>::fill(T v) {
  std::fill(data_.begin(), data_.end(), v);
}

template <typename T>
void Tensor<T>::check_finite(std::string_view what) const {
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) {
      throw NumericError(std::string(what) + ": non-finite value at flat index " +
                         std::to_string(i));
    }
  }
}

std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                               std::size_t pad) {
  if (stride == 0) throw GeometryError("stride must be >= 1");
  if (kernel == 0 || kernel > in + 2 * pad) {
    throw GeometryError("window " + std::to_string(kernel) + " does not fit extent " +
                        std::to_string(in) + " with pad " + std::to_string(pad));
  }
  return (in + 2 * pad - kernel) / stride + 1;
}

namespace {

void require_rank(const Shape& s, std::size_t rank, const char* op) {
  if (s.size() != rank) {
    throw RankError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                    shape_str(s));
  }
}

// Unrolls one sample [C×H×W] into columns [K×P], K = C·kh·kw ordered
// (c, kh, kw), P = H'·W'. Padded taps are zero.
template <typename T>
void im2col(const T* img, std::size_t channels, std::size_t h, std::size_t w, std::size_t kh,
            std::size_t kw, std::size_t oh, std::size_t ow, Conv2dGeometry geo, T* col) {
  const std::size_t p_count = oh * ow;
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t ki = 0; ki < kh; ++ki) {
      for (std::size_t kj = 0; kj < kw; ++kj) {
        T* row = col + ((c * kh + ki) * kw + kj) * p_count;
        for (std::size_t y = 0; y < oh; ++y) {
          const long iy = static_cast<long>(y * geo.stride + ki) - static_cast<long>(geo.pad);
          T* dst = row + y * ow;
          if (iy < 0 || iy >= static_cast<long>(h)) {
            std::fill(dst, dst + ow, T(0));
            continue;
          }
          const T* src = img + (c * h + static_cast<std::size_t>(iy)) * w;
          for (std::size_t x = 0; x < ow; ++x) {
            const long ix = static_cast<long>(x * geo.stride + kj) - static_cast<long>(geo.pad);
            dst[x] = (ix < 0 || ix >= static_cast<long>(w)) ? T(0)
                                                             : src[static_cast<std::size_t>(ix)];
          }
        }
      }
    }
  }
}

// Same taps as im2col, laid out transposed: rows [P×K].
template <typename T>
void im2row(const T* img, std::size_t channels, std::size_t h, std::size_t w, std::size_t kh,
            std::size_t kw, std::size_t oh, std::size_t ow, Conv2dGeometry geo, T* rows) {
  const std::size_t k_count = channels * kh * kw;
  for (std::size_t y = 0; y < oh; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      T* dst = rows + (y * ow + x) * k_count;
      for (std::size_t c = 0; c < channels; ++c) {
        for (std::size_t ki = 0; ki < kh; ++ki) {
          const long iy = static_cast<long>(y * geo.stride + ki) - static_cast<long>(geo.pad);
          const bool row_in = iy >= 0 && iy < static_cast<long>(h);
          for (std::size_t kj = 0; kj < kw; ++kj, ++dst) {
            const long ix = static_cast<long>(x * geo.stride + kj) - static_cast<long>(geo.pad);
            *dst = (!row_in || ix < 0 || ix >= static_cast<long>(w))
                       ? T(0)
                       : img[(c * h + static_cast<std::size_t>(iy)) * w + static_cast<std::size_t>(ix)];
          }
        }
      }
    }
  }
}

// Inverse scatter of im2col: accumulates columns back into an image.
template <typename T>
void col2im(const T* col, std::size_t channels, std::size_t h, std::size_t w, std::size_t kh,
            std::size_t kw, std::size_t oh, std::size_t ow, Conv2dGeometry geo, T* img) {
  const std::size_t p_count = oh * ow;
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t ki = 0; ki < kh; ++ki) {
      for (std::size_t kj = 0; kj < kw; ++kj) {
        const T* row = col + ((c * kh + ki) * kw + kj) * p_count;
        for (std::size_t y = 0; y < oh; ++y) {
          const long iy = static_cast<long>(y * geo.stride + ki) - static_cast<long>(geo.pad);
          if (iy < 0 || iy >= static_cast<long>(h)) continue;
          T* dst = img + (c * h + static_cast<std::size_t>(iy)) * w;
          for (std::size_t x = 0; x < ow; ++x) {
            const long ix = static_cast<long>(x * geo.stride + kj) - static_cast<long>(geo.pad);
            if (ix < 0 || ix >= static_cast<long>(w)) continue;
            dst[static_cast<std::size_t>(ix)] += row[y * ow + x];
          }
        }
      }
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank(a.shape(), 2, "matmul");
  require_rank(b.shape(), 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner dimensions differ for " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
  }
  Tensor<T> c({m, n});
  // i-t-j loop: each c[i][j] still accumulates over t in ascending order.
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c.data() + i * n;
    for (std::size_t t = 0; t < k; ++t) {
      const T av = a[i * k + t];
      const T* brow = b.data() + t * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
  c.check_finite("matmul");
  return c;
}

template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank(a.shape(), 2, "matmul_nt");
  require_rank(b.shape(), 2, "matmul_nt");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
  if (b.dim(1) != k) {
    throw DimensionError("matmul_nt: inner dimensions differ for " + shape_str(a.shape()) +
                         " x " + shape_str(b.shape()) + "^T");
  }
  Tensor<T> c({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    const T* arow = a.data() + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const T* brow = b.data() + j * k;
      T acc = T(0);
      for (std::size_t t = 0; t < k; ++t) acc += arow[t] * brow[t];
      c[i * n + j] = acc;
    }
  }
  c.check_finite("matmul_nt");
  return c;
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
  require_rank(a.shape(), 2, "transpose");
  const std::size_t m = a.dim(0), n = a.dim(1);
  Tensor<T> out({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a[i * n + j];
  return out;
}

template <typename T>
Tensor<T> hadamard(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("hadamard: shapes differ " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
  Tensor<T> out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
  out.check_finite("hadamard");
  return out;
}

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const Tensor<T>& kernel, Conv2dGeometry geo) {
  require_rank(input.shape(), 4, "conv2d_forward");
  require_rank(kernel.shape(), 4, "conv2d_forward");
  const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t o = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
  if (kernel.dim(1) != c) {
    throw GeometryError("conv2d_forward: kernel " + shape_str(kernel.shape()) +
                        " does not match input channels of " + shape_str(input.shape()));
  }
  const std::size_t oh = conv_output_extent(h, kh, geo.stride, geo.pad);
  const std::size_t ow = conv_output_extent(w, kw, geo.stride, geo.pad);
  const std::size_t k_count = c * kh * kw, p_count = oh * ow;

  Tensor<T> out({n, o, oh, ow});
  parallel_for(n, [&](std::size_t s) {
    std::vector<T> col(k_count * p_count);
    im2col(input.data() + s * c * h * w, c, h, w, kh, kw, oh, ow, geo, col.data());
    T* dst = out.data() + s * o * p_count;
    for (std::size_t oc = 0; oc < o; ++oc) {
      T* orow = dst + oc * p_count;
      const T* krow = kernel.data() + oc * k_count;
      for (std::size_t k = 0; k < k_count; ++k) {
        const T kv = krow[k];
        const T* crow = col.data() + k * p_count;
        for (std::size_t p = 0; p < p_count; ++p) orow[p] += kv * crow[p];
      }
    }
  });
  out.check_finite("conv2d_forward");
  return out;
}

template <typename T>
Tensor<T> conv2d_backward_data(const Tensor<T>& error_out, const Tensor<T>& kernel,
                               Conv2dGeometry geo, std::size_t in_h, std::size_t in_w) {
  require_rank(error_out.shape(), 4, "conv2d_backward_data");
  require_rank(kernel.shape(), 4, "conv2d_backward_data");
  const std::size_t n = error_out.dim(0), o = error_out.dim(1);
  const std::size_t c = kernel.dim(1), kh = kernel.dim(2), kw = kernel.dim(3);
  const std::size_t oh = conv_output_extent(in_h, kh, geo.stride, geo.pad);
  const std::size_t ow = conv_output_extent(in_w, kw, geo.stride, geo.pad);
  if (kernel.dim(0) != o || error_out.dim(2) != oh || error_out.dim(3) != ow) {
    throw GeometryError("conv2d_backward_data: error " + shape_str(error_out.shape()) +
                        " inconsistent with kernel " + shape_str(kernel.shape()) +
                        " on input " + std::to_string(in_h) + "x" + std::to_string(in_w));
  }
  const std::size_t k_count = c * kh * kw, p_count = oh * ow;

  Tensor<T> out({n, c, in_h, in_w});
  parallel_for(n, [&](std::size_t s) {
    std::vector<T> col(k_count * p_count, T(0));
    const T* err = error_out.data() + s * o * p_count;
    for (std::size_t oc = 0; oc < o; ++oc) {
      const T* erow = err + oc * p_count;
      const T* krow = kernel.data() + oc * k_count;
      for (std::size_t k = 0; k < k_count; ++k) {
        const T kv = krow[k];
        T* crow = col.data() + k * p_count;
        for (std::size_t p = 0; p < p_count; ++p) crow[p] += kv * erow[p];
      }
    }
    col2im(col.data(), c, in_h, in_w, kh, kw, oh, ow, geo, out.data() + s * c * in_h * in_w);
  });
  out.check_finite("conv2d_backward_data");
  return out;
}

template <typename T>
Tensor<T> conv2d_backward_kernel(const Tensor<T>& input, const Tensor<T>& error_out,
                                 Conv2dGeometry geo, std::size_t kernel_h, std::size_t kernel_w) {
  require_rank(input.shape(), 4, "conv2d_backward_kernel");
  require_rank(error_out.shape(), 4, "conv2d_backward_kernel");
  const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t o = error_out.dim(1);
  const std::size_t oh = conv_output_extent(h, kernel_h, geo.stride, geo.pad);
  const std::size_t ow = conv_output_extent(w, kernel_w, geo.stride, geo.pad);
  if (error_out.dim(0) != n || error_out.dim(2) != oh || error_out.dim(3) != ow) {
    throw GeometryError("conv2d_backward_kernel: error " + shape_str(error_out.shape()) +
                        " inconsistent with input " + shape_str(input.shape()));
  }
  const std::size_t k_count = c * kernel_h * kernel_w, p_count = oh * ow;

  // Per-sample partials, then an ordered reduction: same bits for any
  // worker count.
  std::vector<std::vector<T>> partial(n);
  parallel_for(n, [&](std::size_t s) {
    std::vector<T> rows(p_count * k_count);
    im2row(input.data() + s * c * h * w, c, h, w, kernel_h, kernel_w, oh, ow, geo, rows.data());
    auto& acc = partial[s];
    acc.assign(o * k_count, T(0));
    const T* err = error_out.data() + s * o * p_count;
    // Each acc entry still sums over p in ascending order.
    for (std::size_t oc = 0; oc < o; ++oc) {
      const T* erow = err + oc * p_count;
      T* arow = acc.data() + oc * k_count;
      for (std::size_t p = 0; p < p_count; ++p) {
        const T ev = erow[p];
        const T* rrow = rows.data() + p * k_count;
        for (std::size_t k = 0; k < k_count; ++k) arow[k] += ev * rrow[k];
      }
    }
  });
  Tensor<T> grad({o, c, kernel_h, kernel_w});
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += partial[s][i];
  grad.check_finite("conv2d_backward_kernel");
  return grad;
}

template <typename T>
T dot(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.size() != b.size()) {
    throw DimensionError("dot: sizes differ " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
  T acc = T(0);
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

template <typename T>
T sum(const Tensor<T>& a) {
  T acc = T(0);
  for (auto v : a.values()) acc += v;
  return acc;
}

#define FEEDALIGN_INSTANTIATE(T)                                                                \
  template class Tensor<T>;                                                                     \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                \
  template Tensor<T> matmul_nt(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> transpose(const Tensor<T>&);                                               \
  template Tensor<T> hadamard(const Tensor<T>&, const Tensor<T>&);                              \
  template Tensor<T> conv2d_forward(const Tensor<T>&, const Tensor<T>&, Conv2dGeometry);        \
  template Tensor<T> conv2d_backward_data(const Tensor<T>&, const Tensor<T>&, Conv2dGeometry,   \
                                          std::size_t, std::size_t);                            \
  template Tensor<T> conv2d_backward_kernel(const Tensor<T>&, const Tensor<T>&, Conv2dGeometry, \
                                            std::size_t, std::size_t);                          \
  template T dot(const Tensor<T>&, const Tensor<T>&);                                           \
  template T sum(const Tensor<T>&);

FEEDALIGN_INSTANTIATE(float)
FEEDALIGN_INSTANTIATE(double)

#undef FEEDALIGN_INSTANTIATE

}  // namespace feedalign
