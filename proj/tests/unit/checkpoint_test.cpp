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

#include "feedalign/checkpoint.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

namespace feedalign {
namespace {

NetworkSpec small_hybrid(Strategy s, FeedbackScheme scheme) {
  NetworkSpec spec;
  spec.name = "ckpt";
  spec.input_shape = {1, 4, 4};
  spec.layers = {ConvSpec{2}, BatchNormSpec{}, ActivationSpec{}, MaxPoolSpec{}, FlattenSpec{},
                 DenseSpec{6}, ActivationSpec{}, DenseSpec{5}, ActivationSpec{}, DenseSpec{3}};
  spec.fc_strategy = s;
  spec.feedback_init = {scheme, 1};
  return spec;
}

Dataset tiny_images(std::size_t n, std::uint64_t seed) {
  Dataset d{"tiny", {1, 4, 4}, std::vector<float>(n * 16), std::vector<std::int32_t>(n), 3};
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> g;
  for (auto& v : d.features) v = g(rng);
  for (std::size_t i = 0; i < n; ++i) d.labels[i] = static_cast<std::int32_t>(i % 3);
  return d;
}

std::string save(Network<float>& net, const TrainState<float>* st) {
  std::ostringstream os(std::ios::binary);
  save_checkpoint(os, net, st);
  return os.str();
}

TEST(Checkpoint, RoundTripRestoresEverything) {
  for (auto s : {Strategy::kBP, Strategy::kDFA, Strategy::kBDFA}) {
    Network<float> a(small_hybrid(s, FeedbackScheme::kRandomHe), 1);
    Hyperparams h;
    h.batch = 4;
    h.seed = 2;
    Trainer<float> t(a, h);
    t.train_epoch(tiny_images(12, 3));
    const std::string bytes = save(a, &t.state());
    EXPECT_EQ(bytes.substr(0, 4), "FDAL");

    Network<float> b(small_hybrid(s, FeedbackScheme::kRandomHe), 99);
    TrainState<float> st;
    std::istringstream is(bytes);
    load_checkpoint(is, b, &st);
    EXPECT_EQ(save(b, &st), bytes) << strategy_name(s);
    EXPECT_EQ(st.epoch, 1u);
    EXPECT_EQ(st.step, 3u);
    EXPECT_EQ(feedback_bytes(b), feedback_bytes(a));
    const auto x = gather_features<float>(tiny_images(5, 4), std::vector<std::size_t>{0, 1, 2, 3, 4});
    const ForwardContext eval{Mode::kEval, nullptr};
    EXPECT_EQ(a.forward(x, eval), b.forward(x, eval));
  }
}

TEST(Checkpoint, RejectsMismatches) {
  Network<float> a(small_hybrid(Strategy::kBP, FeedbackScheme::kRandomHe), 1);
  const std::string bytes = save(a, nullptr);

  Network<double> wide(small_hybrid(Strategy::kBP, FeedbackScheme::kRandomHe), 1);
  std::istringstream w(bytes);
  EXPECT_THROW(load_checkpoint<double>(w, wide, nullptr), FormatError);

  auto other = small_hybrid(Strategy::kBP, FeedbackScheme::kRandomHe);
  other.layers[5] = DenseSpec{7};
  Network<float> shape_mismatch(other, 1);
  std::istringstream s(bytes);
  EXPECT_THROW(load_checkpoint<float>(s, shape_mismatch, nullptr), FormatError);

  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  std::istringstream m(bad_magic);
  EXPECT_THROW(load_checkpoint<float>(m, a, nullptr), FormatError);

  std::istringstream cut(bytes.substr(0, bytes.size() / 2));
  EXPECT_THROW(load_checkpoint<float>(cut, a, nullptr), FormatError);

  auto layers = small_hybrid(Strategy::kBP, FeedbackScheme::kRandomHe);
  layers.layers.erase(layers.layers.begin() + 6);
  Network<float> dropped(layers, 1);
  std::istringstream d(bytes);
  EXPECT_THROW(load_checkpoint<float>(d, dropped, nullptr), FormatError);
}

TEST(Checkpoint, HeaderLayout) {
  Network<float> a(small_hybrid(Strategy::kBDFA, FeedbackScheme::kSignProduct), 1);
  const std::string bytes = save(a, nullptr);
  auto u32 = [&](std::size_t off) {
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(bytes[off + i]);
    return v;
  };
  EXPECT_EQ(u32(4), kCheckpointVersion);
  EXPECT_EQ(u32(8), a.layers().size());
  EXPECT_EQ(bytes[12], 4);
  EXPECT_EQ(bytes[13], static_cast<char>(LayerKind::kConv2d));
  EXPECT_EQ(u32(14), 1u);  // kernel only, batch norm follows
  EXPECT_EQ(bytes.back(), 0);  // no train state
}

}  // namespace
}  // namespace feedalign
