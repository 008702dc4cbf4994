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
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "feedalign/feedback.hpp"
#include "feedalign/network.hpp"
#include "feedalign/trainer.hpp"

namespace feedalign::app {

/// Everything a subcommand needs. Built from a preset, then a config file,
/// then command-line flags, each layer overriding the previous one.
struct RunConfig {
  std::string preset;
  std::string dataset;                   // moons | cifar10 | cifar100 | random
  std::filesystem::path data_dir;        // CIFAR binaries
  std::size_t train_subset = 0;          // 0 = whole split
  std::size_t test_subset = 0;
  std::size_t synthetic_train = 1000;    // moons / random sizes
  std::size_t synthetic_test = 1000;
  double synthetic_noise = 0.1;
  bool standardize = true;

  Strategy strategy = Strategy::kBP;
  std::optional<FeedbackScheme> feedback_init;  // unset = strategy default
  bool refresh_feedback = false;
  Precision precision = Precision::kFloat32;

  Hyperparams hyper;
  std::uint64_t seed = 0;
  std::filesystem::path out = ".";
  bool record_time = false;

  std::size_t align_every = 10;          // steps between alignment rows
  double gradcheck_epsilon = 1e-5;
  double gradcheck_tolerance = 1e-5;
  std::size_t gradcheck_entries = 0;     // per parameter, 0 = all
  std::size_t gradcheck_batch = 4;
  double corrupt_scale = 1.0;            // fault injection for checkgrad

  /// Feedback scheme actually used: the explicit choice, else sign-product
  /// for bdfa and random for fa/dfa.
  FeedbackScheme effective_feedback() const;
  /// ConfigError on invalid combinations or values.
  void validate() const;
};

/// Reads `key = value` lines; `#` starts a comment, blank lines are skipped.
/// Later duplicates win. ConfigError names the offending line.
std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text);
std::vector<std::pair<std::string, std::string>> read_config_file(const std::filesystem::path& file);

/// Applies one setting. ConfigError for unknown keys or malformed values.
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);

/// Every effective setting as `key = value` lines, in a fixed order; the
/// output parses back to the same configuration.
std::string echo_config(const RunConfig& cfg);

/// Keys accepted by apply_setting, in echo order.
const std::vector<std::string>& setting_keys();

}  // namespace feedalign::app
