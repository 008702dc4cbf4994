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

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

namespace feedalign {
namespace {

template <typename T>
Tensor<T> random_tensor(Shape shape, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Tensor<T> t(std::move(shape));
  for (auto& v : t.values()) v = static_cast<T>(n(rng));
  return t;
}

TEST(RandomFeedback, SameSeedIsBitIdentical) {
  for (auto scheme : {FeedbackScheme::kRandomHe, FeedbackScheme::kRandomUniform}) {
    const auto a = build_random_feedback<float>(30, 10, scheme, 42);
    const auto b = build_random_feedback<float>(30, 10, scheme, 42);
    EXPECT_EQ(a.values(), b.values());
    EXPECT_TRUE(a.frozen());
    EXPECT_EQ(a.origin(), FeedbackOrigin::kRandom);
  }
}

TEST(RandomFeedback, HeScaleAndSeedSeparation) {
  const auto a = build_random_feedback<double>(1000, 10, FeedbackScheme::kRandomHe, 1);
  double ss = 0.0, mean = 0.0;
  for (auto v : a.values().values()) mean += v;
  mean /= 10000.0;
  for (auto v : a.values().values()) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / 9999.0), target = std::sqrt(2.0 / 10.0);
  EXPECT_NEAR(sd, target, 0.1 * target);

  const auto b = build_random_feedback<double>(1000, 10, FeedbackScheme::kRandomHe, 2);
  std::size_t differ = 0;
  for (std::size_t i = 0; i < 10000; ++i) differ += a.values()[i] != b.values()[i];
  EXPECT_GE(differ, 9900u);
}

TEST(RandomFeedback, UniformBounds) {
  const auto u = build_random_feedback<double>(20, 12, FeedbackScheme::kRandomUniform, 3);
  const double a = std::sqrt(6.0 / 32.0);
  for (auto v : u.values().values()) EXPECT_LE(std::abs(v), a);
  EXPECT_THROW(build_random_feedback<double>(2, 2, FeedbackScheme::kProduct, 0), ConfigError);
  EXPECT_THROW(build_random_feedback<double>(0, 2, FeedbackScheme::kRandomHe, 0), DimensionError);
}

TEST(ProductFeedback, Cases) {
  std::mt19937_64 rng(4);
  const auto w = random_tensor<double>({3, 5}, rng);
  const auto single = build_product_feedback<double>(std::span<const Tensor<double>>(&w, 1));
  EXPECT_EQ(single.values(), transpose(w));
  EXPECT_EQ(single.origin(), FeedbackOrigin::kProduct);

  const std::vector<Tensor<double>> ids = {Tensor<double>::identity(4), Tensor<double>::identity(4)};
  EXPECT_EQ(build_product_feedback<double>(ids).values(), Tensor<double>::identity(4));

  const std::vector<Tensor<double>> bad = {Tensor<double>({4, 6}), Tensor<double>({3, 5})};
  EXPECT_THROW(build_product_feedback<double>(bad), DimensionError);
}

TEST(ProductFeedback, MatchesMatmulAndTwoStepBackprop) {
  std::mt19937_64 rng(5);
  const std::vector<Tensor<double>> chain = {random_tensor<double>({4, 6}, rng), random_tensor<double>({3, 4}, rng)};
  const auto d = build_product_feedback<double>(chain);
  EXPECT_EQ(d.values(), transpose(matmul(chain[1], chain[0])));
  const auto e = random_tensor<double>({5, 3}, rng);
  const auto two_step = matmul(matmul(e, chain[1]), chain[0]);
  const auto direct = project_error(d, e);
  for (std::size_t i = 0; i < direct.size(); ++i) EXPECT_NEAR(direct[i], two_step[i], 1e-12);
}

TEST(Binarize, SignRule) {
  const FeedbackMatrix<double> m(Tensor<double>({2, 2}, {0.5, -0.2, 0.0, 3.1}), FeedbackOrigin::kProduct);
  const auto b = binarize_sign(m);
  EXPECT_EQ(b.sign(0, 0), 1);
  EXPECT_EQ(b.sign(0, 1), -1);
  EXPECT_EQ(b.sign(1, 0), 1);
  EXPECT_EQ(b.sign(1, 1), 1);
  const FeedbackMatrix<double> neg(Tensor<double>({3, 3}, -1.5), FeedbackOrigin::kRandom);
  EXPECT_EQ(binarize_sign(neg).expand<double>(), Tensor<double>({3, 3}, -1.0));
}

TEST(Binarize, PackUnpackRoundTripAndIdempotence) {
  std::mt19937_64 rng(6);
  std::uniform_int_distribution<std::size_t> ext(1, 19);
  for (int trial = 0; trial < 50; ++trial) {
    const FeedbackMatrix<float> m(random_tensor<float>({ext(rng), ext(rng)}, rng), FeedbackOrigin::kRandom);
    const auto b = binarize_sign(m);
    const auto dense = b.expand<float>();
    for (std::size_t i = 0; i < dense.size(); ++i) {
      EXPECT_EQ(dense[i], m.values()[i] >= 0.0f ? 1.0f : -1.0f);
    }
    EXPECT_EQ(binarize_sign(FeedbackMatrix<float>(dense, FeedbackOrigin::kRandom)), b);
    EXPECT_EQ(b.bits().size(), packed_size_bytes(m.rows(), m.cols()));
  }
}

TEST(BinaryMatrix, RejectsWrongByteCountAndStrayBits) {
  EXPECT_THROW(BinaryFeedbackMatrix(3, 3, std::vector<std::uint8_t>(1)), DimensionError);
  EXPECT_THROW(BinaryFeedbackMatrix(3, 3, std::vector<std::uint8_t>{0, 0xFE}), FormatError);
}

TEST(FaError, Cases) {
  std::mt19937_64 rng(7);
  const auto w = random_tensor<double>({4, 6}, rng);  // forward weight out x in
  const FeedbackMatrix<double> r(w, FeedbackOrigin::kProduct);  // R == W, laid out [N_i x N_next]^T
  const FeedbackMatrix<double> rt(transpose(w), FeedbackOrigin::kProduct);
  const auto e = random_tensor<double>({3, 4}, rng);
  const auto fp = random_tensor<double>({3, 6}, rng);
  EXPECT_EQ(fa_error(rt, e, fp), hadamard(matmul(e, w), fp));
  EXPECT_EQ(fa_error(rt, Tensor<double>({3, 4}), fp), Tensor<double>({3, 6}));
  EXPECT_THROW(fa_error(r, e, fp), DimensionError);
}

TEST(DfaError, Cases) {
  const FeedbackMatrix<double> d(Tensor<double>({1, 1}, {-1.5}), FeedbackOrigin::kRandom);
  const Tensor<double> e({2, 1}, {2.0, 4.0}), fp({2, 1}, {0.5, 1.0});
  EXPECT_EQ(dfa_error(d, e, fp), Tensor<double>({2, 1}, {-1.5, -6.0}));
  EXPECT_EQ(dfa_error(d, Tensor<double>({2, 1}), fp), Tensor<double>({2, 1}));
  EXPECT_THROW(dfa_error(d, e, Tensor<double>({2, 1, 1, 1})), DimensionError);
  EXPECT_THROW(dfa_error(d, Tensor<double>({2, 3}), fp), DimensionError);
}

TEST(BdfaError, Cases) {
  std::mt19937_64 rng(8);
  const BinaryFeedbackMatrix ones(4, 3, std::vector<std::uint8_t>{0xFF, 0x0F});
  const auto e = random_tensor<float>({2, 3}, rng);
  const auto fp = random_tensor<float>({2, 4}, rng);
  const auto out = bdfa_error(ones, e, fp);
  for (std::size_t b = 0; b < 2; ++b) {
    const float row = e.at(b, 0) + e.at(b, 1) + e.at(b, 2);
    for (std::size_t r = 0; r < 4; ++r) EXPECT_EQ(out.at(b, r), row * fp.at(b, r));
  }
  const FeedbackMatrix<float> m(random_tensor<float>({5, 7}, rng), FeedbackOrigin::kRandom);
  const auto b = binarize_sign(m);
  const auto e2 = random_tensor<float>({3, 7}, rng);
  const auto fp2 = random_tensor<float>({3, 5}, rng);
  auto negated = bdfa_error(b.negated(), e2, fp2);
  const auto plain = bdfa_error(b, e2, fp2);
  for (std::size_t i = 0; i < plain.size(); ++i) EXPECT_EQ(negated[i], -plain[i]);
}

// Packed add/subtract accumulation is bit-identical to the dense ±1 product.
TEST(BdfaError, EqualsDenseExpansionBitExactly) {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<std::size_t> ext(1, 32), batch(1, 16);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t rows = ext(rng), cols = ext(rng), n = batch(rng);
    const FeedbackMatrix<float> m(random_tensor<float>({rows, cols}, rng), FeedbackOrigin::kRandom);
    const auto b = binarize_sign(m);
    const FeedbackMatrix<float> dense(b.expand<float>(), FeedbackOrigin::kRandom);
    const auto e = random_tensor<float>({n, cols}, rng);
    const auto fp = random_tensor<float>({n, rows}, rng);
    ASSERT_EQ(bdfa_error(b, e, fp), dfa_error(dense, e, fp)) << rows << "x" << cols << " batch " << n;
  }
}

TEST(Sizes, PackedAndDense) {
  EXPECT_EQ(packed_size_bytes(64, 10), 80u);
  EXPECT_EQ(dense_size_bytes(64, 10), 2560u);
  EXPECT_EQ(packed_size_bytes(8, 1), 1u);
  EXPECT_EQ(packed_size_bytes(9, 1), 2u);
  std::mt19937_64 rng(10);
  std::uniform_int_distribution<std::size_t> ext(1, 300);
  for (int i = 0; i < 100; ++i) {
    const std::size_t r = ext(rng), c = 8 * ext(rng);
    EXPECT_EQ(1.0 - static_cast<double>(packed_size_bytes(r, c)) / static_cast<double>(dense_size_bytes(r, c)),
              0.96875);
  }
}

TEST(Serialization, SectionLayout) {
  const BinaryFeedbackMatrix b(3, 3, std::vector<std::uint8_t>{0xA5, 0x01});
  std::ostringstream os;
  write_feedback(os, b);
  const std::string s = os.str();
  ASSERT_EQ(s.size(), 1u + 4 + 4 + 2);
  EXPECT_EQ(s[0], 1);
  EXPECT_EQ(static_cast<unsigned char>(s[1]), 3u);
  EXPECT_EQ(static_cast<unsigned char>(s[9]), 0xA5u);
  const FeedbackMatrix<float> d(Tensor<float>({1, 2}, {1.0f, -2.0f}), FeedbackOrigin::kRandom);
  std::ostringstream od;
  write_feedback(od, d);
  EXPECT_EQ(od.str().size(), 1u + 4 + 4 + 8);
  EXPECT_EQ(od.str()[0], 0);
}

}  // namespace
}  // namespace feedalign
