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

#include "feedalign/app/presets.hpp"

#include "feedalign/errors.hpp"

namespace feedalign::app {
namespace {

void conv_block(std::vector<LayerSpec>& layers, std::size_t channels) {
  layers.push_back(ConvSpec{channels});
  layers.push_back(BatchNormSpec{});
  layers.push_back(ActivationSpec{Activation::kReLU});
}

NetworkSpec small_cnn(const std::string& name, std::size_t classes) {
  NetworkSpec s;
  s.name = name;
  s.input_shape = {3, 32, 32};
  for (std::size_t c : {16, 32, 64}) {
    conv_block(s.layers, c);
    s.layers.push_back(MaxPoolSpec{});
  }
  s.layers.push_back(FlattenSpec{});
  s.layers.push_back(DenseSpec{128});
  s.layers.push_back(ActivationSpec{Activation::kReLU});
  s.layers.push_back(DenseSpec{classes});
  return s;
}

// 13 conv layers with BN and ReLU in five pooled stages, then three FC
// layers without BN.
NetworkSpec vgg16(const std::string& name, std::size_t classes) {
  NetworkSpec s;
  s.name = name;
  s.input_shape = {3, 32, 32};
  const std::vector<std::vector<std::size_t>> stages = {
      {64, 64}, {128, 128}, {256, 256, 256}, {512, 512, 512}, {512, 512, 512}};
  for (const auto& stage : stages) {
    for (auto c : stage) conv_block(s.layers, c);
    s.layers.push_back(MaxPoolSpec{});
  }
  s.layers.push_back(FlattenSpec{});
  s.layers.push_back(DenseSpec{512});
  s.layers.push_back(ActivationSpec{Activation::kReLU});
  s.layers.push_back(DenseSpec{512});
  s.layers.push_back(ActivationSpec{Activation::kReLU});
  s.layers.push_back(DenseSpec{classes});
  return s;
}

NetworkSpec mlp_moons() {
  NetworkSpec s;
  s.name = "mlp-moons";
  s.input_shape = {2};
  s.layers = {DenseSpec{16}, ActivationSpec{Activation::kReLU}, DenseSpec{16},
              ActivationSpec{Activation::kReLU}, DenseSpec{2}};
  return s;
}

NetworkSpec toy_gradcheck() {
  NetworkSpec s;
  s.name = "toy-gradcheck";
  s.input_shape = {3, 8, 8};
  s.precision = Precision::kFloat64;
  for (std::size_t c : {4, 8}) {
    conv_block(s.layers, c);
    s.layers.push_back(MaxPoolSpec{});
  }
  s.layers.push_back(FlattenSpec{});
  s.layers.push_back(DenseSpec{16});
  s.layers.push_back(ActivationSpec{Activation::kReLU});
  s.layers.push_back(DenseSpec{10});
  return s;
}

}  // namespace

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {"mlp-moons",   "smallcnn-cifar10", "smallcnn-cifar100",
                                                 "vgg16-cifar", "vgg16-cifar100",   "toy-gradcheck"};
  return names;
}

NetworkSpec preset_network(const std::string& name) {
  if (name == "mlp-moons") return mlp_moons();
  if (name == "smallcnn-cifar10") return small_cnn(name, 10);
  if (name == "smallcnn-cifar100") return small_cnn(name, 100);
  if (name == "vgg16-cifar") return vgg16(name, 10);
  if (name == "vgg16-cifar100") return vgg16(name, 100);
  if (name == "toy-gradcheck") return toy_gradcheck();
  std::string known;
  for (const auto& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
  throw ConfigError("unknown preset '" + name + "' (known: " + known + ")");
}

RunConfig preset_config(const std::string& name) {
  const NetworkSpec spec = preset_network(name);
  RunConfig cfg;
  cfg.preset = name;
  cfg.precision = spec.precision;
  if (name == "mlp-moons") {
    cfg.dataset = "moons";
    cfg.standardize = false;
    cfg.hyper.lr = 0.1;
    cfg.hyper.batch = 100;
    cfg.hyper.weight_decay = 0.0;
    cfg.hyper.epochs = 200;
  } else if (name == "toy-gradcheck") {
    cfg.dataset = "random";
    cfg.standardize = false;
    cfg.synthetic_train = 64;
    cfg.synthetic_test = 64;
    cfg.hyper.batch = 16;
    cfg.hyper.epochs = 1;
  } else {
    cfg.dataset = name.ends_with("100") ? "cifar100" : "cifar10";
    cfg.hyper.lr = 0.01;
    cfg.hyper.batch = 100;
    cfg.hyper.decay = {0.1, 40};
    cfg.hyper.weight_decay = 5e-4;
    cfg.hyper.epochs = name.starts_with("smallcnn") ? 30 : 120;
    if (name.starts_with("smallcnn")) cfg.train_subset = 5000;
  }
  return cfg;
}

}  // namespace feedalign::app
