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

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "feedalign/parallel.hpp"

namespace feedalign {
namespace {

template <typename T>
Tensor<T> random_tensor(Shape shape, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Tensor<T> t(std::move(shape));
  for (auto& v : t.values()) v = static_cast<T>(n(rng));
  return t;
}

// Direct summation, innermost over kw, then kh, then C.
template <typename T>
Tensor<T> naive_conv(const Tensor<T>& x, const Tensor<T>& k, std::size_t stride, std::size_t pad) {
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t o = k.dim(0), kh = k.dim(2), kw = k.dim(3);
  const std::size_t oh = (h + 2 * pad - kh) / stride + 1, ow = (w + 2 * pad - kw) / stride + 1;
  Tensor<T> out({n, o, oh, ow});
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t oc = 0; oc < o; ++oc)
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t xx = 0; xx < ow; ++xx) {
          T acc = T(0);
          for (std::size_t ic = 0; ic < c; ++ic)
            for (std::size_t i = 0; i < kh; ++i)
              for (std::size_t j = 0; j < kw; ++j) {
                const long iy = static_cast<long>(y * stride + i) - static_cast<long>(pad);
                const long ix = static_cast<long>(xx * stride + j) - static_cast<long>(pad);
                const T v = (iy < 0 || ix < 0 || iy >= static_cast<long>(h) || ix >= static_cast<long>(w))
                                ? T(0)
                                : x.at(s, ic, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix));
                acc += k.at(oc, ic, i, j) * v;
              }
          out.at(s, oc, y, xx) = acc;
        }
  return out;
}

double rel(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-12}); }

// Central difference of F along v: (F(x + h v) - F(x - h v)) / 2h.
Tensor<double> directional(const std::function<Tensor<double>(const Tensor<double>&)>& f,
                           const Tensor<double>& x, const Tensor<double>& v, double h = 1e-6) {
  Tensor<double> up = x, down = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    up[i] += h * v[i];
    down[i] -= h * v[i];
  }
  Tensor<double> a = f(up);
  const Tensor<double> b = f(down);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = (a[i] - b[i]) / (2 * h);
  return a;
}

TEST(Tensor, RejectsMismatchedValueCount) {
  EXPECT_THROW(Tensor<float>({2, 3}, std::vector<float>(5)), DimensionError);
  EXPECT_THROW(Tensor<float>({2, 0}), DimensionError);
  Tensor<float> t({2, 3});
  EXPECT_EQ(t.size(), shape_size(t.shape()));
}

TEST(Tensor, CheckFiniteRaises) {
  Tensor<float> t({2}, {1.0f, std::nanf("")});
  EXPECT_THROW(t.check_finite("t"), NumericError);
  Tensor<double> a({1, 1}, {1e308}), b({1, 1}, {1e308});
  EXPECT_THROW(matmul(a, Tensor<double>({1, 1}, {10.0})), NumericError);
  EXPECT_THROW(hadamard(a, b), NumericError);
}

TEST(Matmul, HandCases) {
  const auto i2 = Tensor<double>::identity(2);
  const Tensor<double> col({2, 1}, {3, 4});
  EXPECT_EQ(matmul(i2, col), col);
  const Tensor<double> a({2, 2}, {1, 2, 3, 4});
  const Tensor<double> b({2, 1}, {5, 6});
  EXPECT_EQ(matmul(a, b), Tensor<double>({2, 1}, {17, 39}));
  EXPECT_THROW(matmul(a, Tensor<double>({3, 1})), DimensionError);
  EXPECT_THROW(matmul(Tensor<double>({2}), a), RankError);
}

TEST(Matmul, MatchesTripleLoopExactly) {
  std::mt19937_64 rng(11);
  const auto a = random_tensor<float>({7, 5}, rng);
  const auto b = random_tensor<float>({5, 3}, rng);
  Tensor<float> oracle({7, 3});
  for (std::size_t i = 0; i < 7; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      float acc = 0.0f;
      for (std::size_t t = 0; t < 5; ++t) acc += a.at(i, t) * b.at(t, j);
      oracle.at(i, j) = acc;
    }
  EXPECT_EQ(matmul(a, b), oracle);
  EXPECT_EQ(matmul_nt(a, transpose(b)), oracle);
}

TEST(Matmul, IdentityIsBitExact) {
  std::mt19937_64 rng(3);
  const auto a = random_tensor<float>({6, 4}, rng);
  EXPECT_EQ(matmul(Tensor<float>::identity(6), a), a);
}

TEST(Transpose, Cases) {
  const Tensor<double> a({2, 2}, {1, 2, 3, 4});
  EXPECT_EQ(transpose(a), Tensor<double>({2, 2}, {1, 3, 2, 4}));
  std::mt19937_64 rng(5);
  const auto r = random_tensor<double>({3, 7}, rng);
  EXPECT_EQ(transpose(transpose(r)), r);
  EXPECT_EQ(transpose(Tensor<double>({1, 4})).shape(), (Shape{4, 1}));
}

TEST(Hadamard, Cases) {
  std::mt19937_64 rng(9);
  const auto a = random_tensor<double>({3, 4}, rng);
  EXPECT_EQ(hadamard(a, Tensor<double>({3, 4}, 1.0)), a);
  EXPECT_EQ(hadamard(a, Tensor<double>({3, 4}, 0.0)), Tensor<double>({3, 4}, 0.0));
  EXPECT_EQ(hadamard(Tensor<double>({1, 2}, {1, -2}), Tensor<double>({1, 2}, {3, 3})),
            Tensor<double>({1, 2}, {3, -6}));
  EXPECT_THROW(hadamard(a, Tensor<double>({4, 3})), DimensionError);
}

TEST(Conv2d, HandCases) {
  const Tensor<double> x({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  const Tensor<double> two({1, 1, 1, 1}, {2});
  auto y = conv2d_forward(x, two, {});
  for (std::size_t i = 0; i < 9; ++i) EXPECT_EQ(y[i], 2 * x[i]);
  const auto ones = conv2d_forward(Tensor<double>({1, 1, 3, 3}, 1.0), Tensor<double>({1, 1, 3, 3}, 1.0), {});
  EXPECT_EQ(ones.shape(), (Shape{1, 1, 1, 1}));
  EXPECT_EQ(ones[0], 9.0);
  EXPECT_THROW(conv2d_forward(x, Tensor<double>({1, 2, 1, 1}), {}), GeometryError);
  EXPECT_THROW(conv2d_forward(x, Tensor<double>({1, 1, 5, 5}), {}), GeometryError);
}

TEST(Conv2d, ForwardMatchesNaiveLoopExactly) {
  std::mt19937_64 rng(21);
  const auto x = random_tensor<float>({2, 3, 8, 8}, rng);
  const auto k = random_tensor<float>({4, 3, 3, 3}, rng);
  EXPECT_EQ(conv2d_forward(x, k, {1, 1}), naive_conv(x, k, 1, 1));
  EXPECT_EQ(conv2d_forward(x, k, {2, 0}), naive_conv(x, k, 2, 0));
  const auto xd = random_tensor<double>({2, 2, 7, 5}, rng);
  const auto kd = random_tensor<double>({3, 2, 3, 2}, rng);
  EXPECT_EQ(conv2d_forward(xd, kd, {2, 1}), naive_conv(xd, kd, 2, 1));
}

TEST(Conv2d, BackwardDataCases) {
  const Tensor<double> e({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  const auto scaled = conv2d_backward_data(e, Tensor<double>({1, 1, 1, 1}, {2}), {}, 3, 3);
  for (std::size_t i = 0; i < 9; ++i) EXPECT_EQ(scaled[i], 2 * e[i]);
  // An impulse at the centre stamps the kernel back onto the input.
  Tensor<double> impulse({1, 1, 3, 3});
  impulse.at(0, 0, 1, 1) = 1.0;
  const Tensor<double> k({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  const auto stamp = conv2d_backward_data(impulse, k, {1, 1}, 3, 3);
  for (std::size_t i = 0; i < 9; ++i) EXPECT_EQ(stamp[i], k[i]);
}

TEST(Conv2d, BackwardKernelCases) {
  std::mt19937_64 rng(4);
  const auto x = random_tensor<double>({2, 3, 5, 5}, rng);
  const auto g = conv2d_backward_kernel(x, Tensor<double>({2, 4, 5, 5}), {1, 1}, 3, 3);
  EXPECT_EQ(g, Tensor<double>({4, 3, 3, 3}));
  const auto one = conv2d_backward_kernel(Tensor<double>({1, 1, 1, 1}, {3.0}),
                                          Tensor<double>({1, 1, 1, 1}, {-2.0}), {}, 1, 1);
  EXPECT_EQ(one[0], -6.0);
}

// <B(e), v> == <e, dF(v)> for the conv backward ops, ≥20 random instances.
TEST(Conv2d, BackwardOpsAreAdjoints) {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<std::size_t> ext(3, 7), ch(1, 3), st(1, 2), pd(0, 1), ks(1, 3);
  for (int trial = 0; trial < 24; ++trial) {
    const std::size_t n = ch(rng), c = ch(rng), o = ch(rng), h = ext(rng), w = ext(rng);
    const std::size_t kh = ks(rng), kw = ks(rng);
    const Conv2dGeometry geo{st(rng), pd(rng)};
    const auto x = random_tensor<double>({n, c, h, w}, rng);
    const auto k = random_tensor<double>({o, c, kh, kw}, rng);
    const auto y = conv2d_forward(x, k, geo);
    const auto e = random_tensor<double>(y.shape(), rng);

    const auto vx = random_tensor<double>(x.shape(), rng);
    const auto dfx = directional([&](const Tensor<double>& xi) { return conv2d_forward(xi, k, geo); }, x, vx);
    const double lhs_x = dot(conv2d_backward_data(e, k, geo, h, w), vx);
    EXPECT_LE(rel(lhs_x, dot(e, dfx)), 1e-6) << "trial " << trial;

    const auto vk = random_tensor<double>(k.shape(), rng);
    const auto dfk = directional([&](const Tensor<double>& ki) { return conv2d_forward(x, ki, geo); }, k, vk);
    const double lhs_k = dot(conv2d_backward_kernel(x, e, geo, kh, kw), vk);
    EXPECT_LE(rel(lhs_k, dot(e, dfk)), 1e-6) << "trial " << trial;
  }
}

TEST(Conv2d, KernelGradientMatchesPerEntryFiniteDifference) {
  std::mt19937_64 rng(13);
  const auto x = random_tensor<double>({2, 2, 6, 6}, rng);
  auto k = random_tensor<double>({3, 2, 3, 3}, rng);
  const Conv2dGeometry geo{1, 1};
  const auto e = random_tensor<double>({2, 3, 6, 6}, rng);
  const auto g = conv2d_backward_kernel(x, e, geo, 3, 3);
  for (std::size_t i = 0; i < k.size(); ++i) {
    const double saved = k[i], h = 1e-5;
    k[i] = saved + h;
    const double up = dot(e, conv2d_forward(x, k, geo));
    k[i] = saved - h;
    const double down = dot(e, conv2d_forward(x, k, geo));
    k[i] = saved;
    EXPECT_LE(rel(g[i], (up - down) / (2 * h)), 1e-5) << "entry " << i;
  }
}

TEST(Conv2d, ThreadCountDoesNotChangeBits) {
  std::mt19937_64 rng(8);
  const auto x = random_tensor<float>({6, 3, 9, 9}, rng);
  const auto k = random_tensor<float>({5, 3, 3, 3}, rng);
  const auto e = random_tensor<float>({6, 5, 9, 9}, rng);
  const std::size_t saved = thread_limit();
  set_thread_limit(1);
  const auto f1 = conv2d_forward(x, k, {1, 1});
  const auto d1 = conv2d_backward_data(e, k, {1, 1}, 9, 9);
  const auto g1 = conv2d_backward_kernel(x, e, {1, 1}, 3, 3);
  set_thread_limit(4);
  EXPECT_EQ(conv2d_forward(x, k, {1, 1}), f1);
  EXPECT_EQ(conv2d_backward_data(e, k, {1, 1}, 9, 9), d1);
  EXPECT_EQ(conv2d_backward_kernel(x, e, {1, 1}, 3, 3), g1);
  set_thread_limit(saved);
}

TEST(Reductions, DotAndSum) {
  const Tensor<double> a({3}, {1, 2, 3}), b({3}, {4, 5, 6});
  EXPECT_EQ(dot(a, b), 32.0);
  EXPECT_EQ(sum(a), 6.0);
  EXPECT_THROW(dot(a, Tensor<double>({2})), DimensionError);
}

}  // namespace
}  // namespace feedalign
