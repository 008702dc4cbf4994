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

#include "feedalign/app/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "feedalign/errors.hpp"

namespace feedalign::app {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename N>
N parse_number(const std::string& key, const std::string& value) {
  N out{};
  const char* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end || value.empty()) {
    throw ConfigError("invalid value for " + key + ": '" + value + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  throw ConfigError("invalid value for " + key + ": '" + value + "' (expected true or false)");
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

FeedbackScheme parse_scheme(const std::string& value) {
  if (value == "random") return FeedbackScheme::kRandomHe;
  if (value == "random-uniform") return FeedbackScheme::kRandomUniform;
  if (value == "product") return FeedbackScheme::kProduct;
  if (value == "sign-product") return FeedbackScheme::kSignProduct;
  throw ConfigError("unknown feedback init '" + value + "' (random, random-uniform, product, sign-product)");
}

}  // namespace

FeedbackScheme RunConfig::effective_feedback() const {
  if (feedback_init) return *feedback_init;
  return strategy == Strategy::kBDFA ? FeedbackScheme::kSignProduct : FeedbackScheme::kRandomHe;
}

void RunConfig::validate() const {
  hyper.validate();
  if (dataset != "moons" && dataset != "cifar10" && dataset != "cifar100" &&
      dataset != "random") {
    throw ConfigError("unknown dataset '" + dataset + "'");
  }
  if (hyper.epochs == 0) throw ConfigError("epochs must be >= 1");
  if (synthetic_train == 0 || synthetic_test == 0) throw ConfigError("synthetic set sizes must be >= 1");
  if (!(synthetic_noise >= 0.0)) throw ConfigError("synthetic noise must be >= 0");
  if (align_every == 0) throw ConfigError("align_every must be >= 1");
  if (!(gradcheck_epsilon >= 1e-7 && gradcheck_epsilon <= 1e-3)) {
    throw ConfigError("gradcheck_epsilon must lie in [1e-7, 1e-3]");
  }
  if (!(gradcheck_tolerance > 0.0)) throw ConfigError("gradcheck_tolerance must be > 0");
  if (gradcheck_batch < 2) throw ConfigError("gradcheck_batch must be >= 2");
  if (strategy == Strategy::kBP && feedback_init) {
    throw ConfigError("feedback_init has no meaning for strategy bp");
  }
  if (out.empty()) throw ConfigError("output directory must not be empty");
}

std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream is(text);
  std::string line;
  for (std::size_t n = 1; std::getline(is, line); ++n) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(n) + ": expected 'key = value'");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(n) + ": empty key");
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> read_config_file(const std::filesystem::path& file) {
  std::ifstream is(file);
  if (!is) throw ConfigError("cannot read config file " + file.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_config_text(ss.str());
}

const std::vector<std::string>& setting_keys() {
  static const std::vector<std::string> keys = {
      "preset",         "dataset",          "data_dir",          "train_subset",
      "test_subset",    "synthetic_train",  "synthetic_test",    "synthetic_noise",
      "standardize",    "strategy",         "feedback_init",     "refresh_feedback",
      "precision",      "lr",               "batch",             "momentum",
      "weight_decay",   "lr_decay_factor",  "lr_decay_every",    "epochs",
      "augment",        "seed",             "out",               "record_time",
      "align_every",    "gradcheck_epsilon", "gradcheck_tolerance", "gradcheck_entries",
      "gradcheck_batch", "corrupt_scale"};
  return keys;
}

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
  using std::size_t;
  if (key == "preset") cfg.preset = value;
  else if (key == "dataset") cfg.dataset = value;
  else if (key == "data_dir") cfg.data_dir = value;
  else if (key == "train_subset") cfg.train_subset = parse_number<size_t>(key, value);
  else if (key == "test_subset") cfg.test_subset = parse_number<size_t>(key, value);
  else if (key == "synthetic_train") cfg.synthetic_train = parse_number<size_t>(key, value);
  else if (key == "synthetic_test") cfg.synthetic_test = parse_number<size_t>(key, value);
  else if (key == "synthetic_noise") cfg.synthetic_noise = parse_number<double>(key, value);
  else if (key == "standardize") cfg.standardize = parse_bool(key, value);
  else if (key == "strategy") cfg.strategy = parse_strategy(value);
  else if (key == "feedback_init") {
    if (value == "auto") cfg.feedback_init.reset();
    else cfg.feedback_init = parse_scheme(value);
  }
  else if (key == "refresh_feedback") cfg.refresh_feedback = parse_bool(key, value);
  else if (key == "precision") {
    if (value == "32" || value == "float32") cfg.precision = Precision::kFloat32;
    else if (value == "64" || value == "float64") cfg.precision = Precision::kFloat64;
    else throw ConfigError("invalid value for precision: '" + value + "' (32 or 64)");
  }
  else if (key == "lr") cfg.hyper.lr = parse_number<double>(key, value);
  else if (key == "batch") cfg.hyper.batch = parse_number<size_t>(key, value);
  else if (key == "momentum") cfg.hyper.momentum = parse_number<double>(key, value);
  else if (key == "weight_decay") cfg.hyper.weight_decay = parse_number<double>(key, value);
  else if (key == "lr_decay_factor") cfg.hyper.decay.factor = parse_number<double>(key, value);
  else if (key == "lr_decay_every") cfg.hyper.decay.every = parse_number<size_t>(key, value);
  else if (key == "epochs") cfg.hyper.epochs = parse_number<size_t>(key, value);
  else if (key == "augment") cfg.hyper.augment.enabled = parse_bool(key, value);
  else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "out") cfg.out = value;
  else if (key == "record_time") cfg.record_time = parse_bool(key, value);
  else if (key == "align_every") cfg.align_every = parse_number<size_t>(key, value);
  else if (key == "gradcheck_epsilon") cfg.gradcheck_epsilon = parse_number<double>(key, value);
  else if (key == "gradcheck_tolerance") cfg.gradcheck_tolerance = parse_number<double>(key, value);
  else if (key == "gradcheck_entries") cfg.gradcheck_entries = parse_number<size_t>(key, value);
  else if (key == "gradcheck_batch") cfg.gradcheck_batch = parse_number<size_t>(key, value);
  else if (key == "corrupt_scale") cfg.corrupt_scale = parse_number<double>(key, value);
  else throw ConfigError("unknown setting '" + key + "'");
}

std::string echo_config(const RunConfig& cfg) {
  std::ostringstream os;
  auto line = [&](const char* k, const std::string& v) { os << k << " = " << v << '\n'; };
  auto b = [](bool v) { return std::string(v ? "true" : "false"); };
  line("preset", cfg.preset);
  line("dataset", cfg.dataset);
  line("data_dir", cfg.data_dir.string());
  line("train_subset", std::to_string(cfg.train_subset));
  line("test_subset", std::to_string(cfg.test_subset));
  line("synthetic_train", std::to_string(cfg.synthetic_train));
  line("synthetic_test", std::to_string(cfg.synthetic_test));
  line("synthetic_noise", fmt_double(cfg.synthetic_noise));
  line("standardize", b(cfg.standardize));
  line("strategy", strategy_name(cfg.strategy));
  line("feedback_init", cfg.feedback_init ? scheme_name(*cfg.feedback_init) : "auto");
  line("refresh_feedback", b(cfg.refresh_feedback));
  line("precision", cfg.precision == Precision::kFloat64 ? "64" : "32");
  line("lr", fmt_double(cfg.hyper.lr));
  line("batch", std::to_string(cfg.hyper.batch));
  line("momentum", fmt_double(cfg.hyper.momentum));
  line("weight_decay", fmt_double(cfg.hyper.weight_decay));
  line("lr_decay_factor", fmt_double(cfg.hyper.decay.factor));
  line("lr_decay_every", std::to_string(cfg.hyper.decay.every));
  line("epochs", std::to_string(cfg.hyper.epochs));
  line("augment", b(cfg.hyper.augment.enabled));
  line("seed", std::to_string(cfg.seed));
  line("out", cfg.out.string());
  line("record_time", b(cfg.record_time));
  line("align_every", std::to_string(cfg.align_every));
  line("gradcheck_epsilon", fmt_double(cfg.gradcheck_epsilon));
  line("gradcheck_tolerance", fmt_double(cfg.gradcheck_tolerance));
  line("gradcheck_entries", std::to_string(cfg.gradcheck_entries));
  line("gradcheck_batch", std::to_string(cfg.gradcheck_batch));
  line("corrupt_scale", fmt_double(cfg.corrupt_scale));
  return os.str();
}

}  // namespace feedalign::app
