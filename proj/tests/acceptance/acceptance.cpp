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

// Acceptance run: one PASS / FAIL line per criterion. `--cifar` runs the two
// CIFAR-10 trend checks instead (needs FEEDALIGN_CIFAR10_DIR; exit 77 if
// the binaries are missing so ctest reports a skip).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>
#include <vector>

#include "feedalign/app/commands.hpp"
#include "feedalign/app/presets.hpp"
#include "feedalign/checkpoint.hpp"
#include "feedalign/diagnostics.hpp"
#include "feedalign/feedback.hpp"
#include "feedalign/network.hpp"
#include "feedalign/parallel.hpp"
#include "feedalign/trainer.hpp"

namespace fs = std::filesystem;
using namespace feedalign;

namespace {

// Pinned tolerances.
constexpr double kGradCheckTol = 1e-5;
constexpr double kProductIdentityTol = 1e-6;
constexpr std::size_t kProductSeeds = 25;
constexpr std::size_t kBinaryTrials = 300;
constexpr double kPackedReduction = 0.96875;
constexpr std::size_t kFrozenEpochs = 5;
constexpr double kMoonsTarget = 95.0;
constexpr std::size_t kMoonsEpochs = 200;
constexpr double kTrendBand = 5.0;
constexpr double kTrendFloor = 40.0;
constexpr std::size_t kStabilityWindow = 10;

constexpr int kSkip = 77;

fs::path g_scratch;

struct Outcome {
  bool pass;
  std::string detail;
};

int report(int id, const std::string& title, const std::function<Outcome()>& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = fn();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1fs", secs);
  std::cout << (o.pass ? "PASS" : "FAIL") << "  [" << id << "] " << title << ": " << o.detail << " (" << buf
            << ")" << std::endl;
  return o.pass ? 0 : 1;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

template <typename T>
Tensor<T> gaussian(Shape shape, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Tensor<T> t(std::move(shape));
  for (auto& v : t.values()) v = static_cast<T>(n(rng));
  return t;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = g_scratch / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int cli(std::vector<std::string> args, std::string* out = nullptr) {
  std::ostringstream o, e;
  const int code = app::run(args, o, e);
  if (out) *out = o.str();
  if (code != 0) std::cerr << e.str();
  return code;
}

struct EpochRow {
  std::size_t epoch;
  std::string phase;
  double top1;
};

std::vector<EpochRow> read_metrics(const fs::path& file) {
  std::vector<EpochRow> rows;
  std::istringstream is(slurp(file));
  std::string line;
  std::getline(is, line);
  while (std::getline(is, line)) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) f.push_back(c);
    if (f.size() < 4) continue;
    rows.push_back({std::stoul(f[0]), f[1], std::stod(f[3])});
  }
  return rows;
}

std::vector<double> top1_series(const fs::path& file, const std::string& phase) {
  std::vector<double> v;
  for (const auto& r : read_metrics(file))
    if (r.phase == phase) v.push_back(r.top1);
  return v;
}

// 1
Outcome gradient_oracle() {
  std::string out;
  const fs::path dir = scratch("gradcheck");
  const int code = cli({"checkgrad", "--preset", "toy-gradcheck", "--out", dir.string(), "--set",
                        "gradcheck_tolerance=" + fmt("%.17g", kGradCheckTol)},
                       &out);
  std::size_t checked = 0;
  double worst = 0.0;
  std::istringstream csv(slurp(dir / "gradcheck.csv"));
  std::string line;
  std::getline(csv, line);
  while (std::getline(csv, line)) {
    const auto c1 = line.rfind(',');
    const auto c0 = line.rfind(',', c1 - 1);
    if (line.compare(c0 + 1, c1 - c0 - 1, "rel_error") != 0) continue;
    ++checked;
    worst = std::max(worst, std::stod(line.substr(c1 + 1)));
  }
  const bool pass = code == 0 && checked > 0 && worst <= kGradCheckTol;
  return {pass, std::to_string(checked) + " entries, worst relative error " + fmt("%.3e", worst) + " <= " +
                    fmt("%.0e", kGradCheckTol)};
}

// 2
Outcome product_identity() {
  double worst = 0.0;
  std::size_t tensors = 0;
  for (std::uint64_t seed = 0; seed < kProductSeeds; ++seed) {
    std::mt19937_64 rng(seed * 7919 + 1);
    std::uniform_int_distribution<std::size_t> width(3, 24), depth(3, 6);
    NetworkSpec spec;
    spec.name = "linear-stack";
    spec.input_shape = {width(rng)};
    const std::size_t d = depth(rng);
    for (std::size_t i = 0; i < d; ++i) spec.layers.push_back(DenseSpec{width(rng)});
    spec.fc_strategy = Strategy::kDFA;
    spec.feedback_init = {FeedbackScheme::kProduct, seed};
    spec.precision = Precision::kFloat64;
    Network<double> net(spec, seed);
    const std::size_t batch = 1 + seed % 8;
    const auto x = gaussian<double>({batch, spec.input_shape[0]}, rng);
    const auto e = gaussian<double>({batch, spec.class_count()}, rng);
    net.forward(x, ForwardContext{Mode::kTrain, &rng});
    net.backward(e, Strategy::kBP);
    const auto bp = net.fc_errors();
    net.backward(e, Strategy::kDFA);
    const auto& dfa = net.fc_errors();
    for (std::size_t k = 0; k < bp.size(); ++k) {
      ++tensors;
      double num = 0.0, den = 0.0;
      for (std::size_t i = 0; i < bp[k].size(); ++i) {
        num = std::max(num, std::abs(dfa[k][i] - bp[k][i]));
        den = std::max(den, std::abs(bp[k][i]));
      }
      worst = std::max(worst, num / std::max(den, 1e-300));
    }
  }
  return {worst <= kProductIdentityTol, std::to_string(kProductSeeds) + " seeds, " + std::to_string(tensors) +
                                            " error tensors, worst relative deviation " + fmt("%.3e", worst)};
}

// 3
template <typename T>
std::size_t binary_trials(std::mt19937_64& rng, std::size_t trials) {
  std::uniform_int_distribution<std::size_t> ext(1, 70), batch(1, 20);
  std::size_t mismatches = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    const std::size_t rows = ext(rng), cols = ext(rng), n = batch(rng);
    const FeedbackMatrix<T> m(gaussian<T>({rows, cols}, rng), FeedbackOrigin::kRandom);
    const auto b = binarize_sign(m);
    const FeedbackMatrix<T> dense(b.template expand<T>(), FeedbackOrigin::kRandom);
    const auto e = gaussian<T>({n, cols}, rng);
    const auto fp = gaussian<T>({n, rows}, rng);
    if (!(bdfa_error(b, e, fp) == dfa_error(dense, e, fp))) ++mismatches;
  }
  return mismatches;
}

Outcome binary_equivalence() {
  std::mt19937_64 rng(31337);
  const std::size_t bad = binary_trials<float>(rng, kBinaryTrials) + binary_trials<double>(rng, kBinaryTrials);
  return {bad == 0, std::to_string(2 * kBinaryTrials) + " random shapes (32 and 64 bit), " + std::to_string(bad) +
                        " not bit-identical"};
}

// 4
Outcome memory_claim() {
  std::size_t rows_checked = 0;
  bool ok = true;
  std::string shown;
  auto check = [&](NetworkSpec spec) {
    spec.fc_strategy = Strategy::kBDFA;
    spec.feedback_init = {FeedbackScheme::kRandomHe, 1};
    spec.precision = Precision::kFloat32;
    Network<float> net(spec, 1);
    for (const auto& row : memory_report(net).feedback) {
      ++rows_checked;
      ok = ok && row.reduction == kPackedReduction && row.stored_bytes == row.packed_bytes &&
           format_percent(row.reduction) == "96.9";
      shown = format_percent(row.reduction);
    }
  };
  check(app::preset_network("vgg16-cifar"));
  check(app::preset_network("vgg16-cifar100"));
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<std::size_t> eights(1, 40);
  for (int i = 0; i < 30; ++i) {
    NetworkSpec s;
    s.name = "fc";
    s.input_shape = {8 * eights(rng)};
    for (int k = 0; k < 3; ++k) {
      s.layers.push_back(DenseSpec{8 * eights(rng)});
      s.layers.push_back(ActivationSpec{});
    }
    s.layers.push_back(DenseSpec{8 * eights(rng)});
    check(s);
  }
  return {ok && rows_checked > 0, std::to_string(rows_checked) + " feedback matrices at exactly " +
                                      fmt("%.3f", 100 * kPackedReduction) + "%, shown as " + shown + "%"};
}

// 5
Outcome frozen_feedback() {
  const app::RunConfig cfg = app::preset_config("mlp-moons");
  const Dataset data = two_moons(cfg.synthetic_train, cfg.synthetic_noise, 5);
  std::string detail;
  bool ok = true;
  const std::pair<Strategy, FeedbackScheme> runs[] = {{Strategy::kFA, FeedbackScheme::kRandomHe},
                                                      {Strategy::kDFA, FeedbackScheme::kRandomHe},
                                                      {Strategy::kDFA, FeedbackScheme::kProduct},
                                                      {Strategy::kBDFA, FeedbackScheme::kSignProduct}};
  for (const auto& [strategy, scheme] : runs) {
    NetworkSpec spec = app::preset_network("mlp-moons");
    spec.fc_strategy = strategy;
    spec.feedback_init = {scheme, 11};
    Network<float> net(spec, 3);
    const std::string before = feedback_bytes(net);
    const Tensor<float> w0 = net.dense(0).weight().value;
    Hyperparams h = cfg.hyper;
    h.seed = 3;
    Trainer<float> trainer(net, h);
    for (std::size_t e = 0; e < kFrozenEpochs; ++e) trainer.train_epoch(data);
    const bool same = feedback_bytes(net) == before;
    const bool moved = !(net.dense(0).weight().value == w0);
    ok = ok && same && moved && !before.empty();
    detail += (detail.empty() ? "" : ", ") + strategy_name(strategy) + "/" + scheme_name(scheme) + " " +
              std::to_string(before.size()) + " B " + (same ? "unchanged" : "CHANGED");
  }
  return {ok, detail + " after " + std::to_string(kFrozenEpochs) + " epochs"};
}

// 6
Outcome moons_convergence() {
  const std::pair<std::string, std::string> runs[] = {
      {"bp", ""}, {"dfa", "random"}, {"dfa", "product"}, {"bdfa", "sign-product"}};
  bool ok = true;
  std::string detail;
  for (const auto& [strategy, init] : runs) {
    const fs::path dir = scratch("moons_" + strategy + (init.empty() ? "" : "_" + init));
    std::vector<std::string> args = {"train", "--preset", "mlp-moons", "--strategy", strategy, "--seed", "0",
                                     "--epochs", std::to_string(kMoonsEpochs), "--out", dir.string()};
    if (!init.empty()) {
      args.push_back("--feedback-init");
      args.push_back(init);
    }
    const int code = cli(args);
    const auto train = top1_series(dir / "metrics.csv", "train");
    std::size_t first = 0;
    for (std::size_t e = 0; e < train.size() && !first; ++e)
      if (train[e] >= kMoonsTarget) first = e + 1;
    const bool reached = code == 0 && train.size() == kMoonsEpochs && first != 0;
    ok = ok && reached;
    detail += (detail.empty() ? "" : ", ") + strategy + (init.empty() ? "" : "/" + init) + " " +
              (reached ? "epoch " + std::to_string(first) : std::string("never")) + " (final " +
              (train.empty() ? std::string("-") : fmt("%.1f", train.back())) + "%)";
  }
  return {ok, ">= " + fmt("%.0f", kMoonsTarget) + "% train top-1: " + detail};
}

// 9
int cli_with_threads(const std::string& exe, std::size_t threads, const std::vector<std::string>& args) {
  std::string cmd = "FEEDALIGN_THREADS=" + std::to_string(threads) + " '" + exe + "'";
  for (const auto& a : args) cmd += " '" + a + "'";
  cmd += " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome thread_determinism(const std::string& exe) {
  const std::vector<std::vector<std::string>> runs = {
      {"train", "--preset", "mlp-moons", "--strategy", "bdfa", "--epochs", "15", "--seed", "9"},
      {"train", "--preset", "mlp-moons", "--strategy", "fa", "--epochs", "15", "--seed", "9"},
      {"train", "--preset", "toy-gradcheck", "--strategy", "dfa", "--epochs", "3", "--seed", "9", "--set",
       "synthetic_train=96", "--momentum", "0.9", "--augment"},
      {"align", "--preset", "toy-gradcheck", "--strategy", "bdfa", "--epochs", "2", "--seed", "4", "--align-every",
       "2"},
  };
  const std::size_t thread_counts[] = {1, 2, 3, 8};
  // Every output except config.echo, which records the output directory.
  auto outputs = [](const fs::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& f : fs::directory_iterator(dir))
      if (f.path().filename() != "config.echo") files[f.path().filename().string()] = slurp(f.path());
    return files;
  };
  bool ok = true;
  std::size_t compared = 0;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    std::map<std::string, std::string> ref;
    for (std::size_t t : thread_counts) {
      const fs::path dir = scratch("threads_" + std::to_string(r) + "_" + std::to_string(t));
      auto args = runs[r];
      args.push_back("--out");
      args.push_back(dir.string());
      if (cli_with_threads(exe, t, args) != 0) {
        ok = false;
        continue;
      }
      auto files = outputs(dir);
      ok = ok && files.count("metrics.csv") == 1;
      if (ref.empty()) {
        ref = std::move(files);
      } else {
        compared += files.size();
        ok = ok && files == ref;
      }
    }
  }
  return {ok, std::to_string(runs.size()) + " configs at FEEDALIGN_THREADS=1,2,3,8: " + std::to_string(compared) +
                  " output files (metrics, checkpoints, alignment logs) " + (ok ? "byte-identical" : "DIFFER")};
}

// 10
Outcome order_independence() {
  std::size_t orders = 0, mismatches = 0;
  for (auto strategy : {Strategy::kDFA, Strategy::kBDFA}) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      NetworkSpec spec;
      spec.name = "hybrid";
      spec.input_shape = {3, 8, 8};
      spec.layers = {ConvSpec{4}, BatchNormSpec{}, ActivationSpec{}, MaxPoolSpec{}, FlattenSpec{}};
      for (std::size_t w : {24, 20, 16, 12}) {
        spec.layers.push_back(DenseSpec{w});
        spec.layers.push_back(ActivationSpec{seed == 1 ? Activation::kTanh : Activation::kReLU});
      }
      spec.layers.push_back(DenseSpec{10});
      spec.fc_strategy = strategy;
      spec.feedback_init = {seed == 2 ? FeedbackScheme::kRandomHe : FeedbackScheme::kSignProduct, seed};
      Network<float> net(spec, seed);
      std::mt19937_64 rng(seed + 40);
      const auto x = gaussian<float>({6, 3, 8, 8}, rng);
      const auto e = gaussian<float>({6, 10}, rng);
      net.forward(x, ForwardContext{Mode::kTrain, &rng});
      net.backward(e);
      const auto ref_errors = net.fc_errors();
      const Tensor<float> ref_junction = net.junction_error();
      std::vector<Tensor<float>> ref_grads;
      for (auto* p : net.params()) ref_grads.push_back(p->grad);
      std::vector<std::size_t> order = {0, 1, 2, 3};
      do {
        ++orders;
        net.backward(e, strategy, order);
        bool same = net.fc_errors() == ref_errors && net.junction_error() == ref_junction;
        auto params = net.params();
        for (std::size_t i = 0; i < params.size(); ++i) same = same && params[i]->grad == ref_grads[i];
        mismatches += same ? 0 : 1;
      } while (std::next_permutation(order.begin(), order.end()));
    }
  }
  return {mismatches == 0 && orders > 0, std::to_string(orders) + " processing orders (dfa, bdfa), " +
                                             std::to_string(mismatches) + " not bit-identical"};
}

// 7, 8
bool has_cifar10(const fs::path& dir) {
  for (const char* f : {"data_batch_1.bin", "data_batch_2.bin", "data_batch_3.bin", "data_batch_4.bin",
                        "data_batch_5.bin", "test_batch.bin"})
    if (!fs::exists(dir / f)) return false;
  return true;
}

std::vector<double> cifar_run(const fs::path& data, const std::string& name, std::vector<std::string> extra) {
  const fs::path dir = scratch(name);
  std::vector<std::string> args = {"train", "--preset", "smallcnn-cifar10", "--data-dir", data.string(), "--out",
                                   dir.string()};
  args.insert(args.end(), extra.begin(), extra.end());
  if (cli(args) != 0) throw std::runtime_error("training run " + name + " failed");
  return top1_series(dir / "metrics.csv", "test");
}

Outcome trend_check(const fs::path& data) {
  const auto bp = cifar_run(data, "trend_bp", {"--strategy", "bp", "--seed", "0"});
  const auto cbdfa = cifar_run(data, "trend_cbdfa", {"--strategy", "cbdfa", "--seed", "0"});
  const double a = bp.back(), b = cbdfa.back();
  const bool ok = std::abs(a - b) <= kTrendBand && a > kTrendFloor && b > kTrendFloor;
  return {ok, "test top-1 bp " + fmt("%.2f", a) + "%, cbdfa " + fmt("%.2f", b) + "% (band " +
                  fmt("%.0f", kTrendBand) + ", floor " + fmt("%.0f", kTrendFloor) + ")"};
}

double tail_stddev(const std::vector<double>& v) {
  const std::size_t n = std::min(kStabilityWindow, v.size());
  const double mean = std::accumulate(v.end() - n, v.end(), 0.0) / n;
  double ss = 0.0;
  for (auto it = v.end() - n; it != v.end(); ++it) ss += (*it - mean) * (*it - mean);
  return std::sqrt(ss / n);
}

Outcome stability_check(const fs::path& data) {
  double sign_sum = 0.0, random_sum = 0.0;
  std::string detail;
  for (int seed = 0; seed < 3; ++seed) {
    const std::string s = std::to_string(seed);
    const auto sign = cifar_run(data, "stab_sign_" + s,
                                {"--strategy", "cbdfa", "--feedback-init", "sign-product", "--lr", "0.1", "--seed", s});
    const auto rnd = cifar_run(data, "stab_random_" + s,
                               {"--strategy", "cbdfa", "--feedback-init", "random", "--lr", "0.1", "--seed", s});
    const double a = tail_stddev(sign), b = tail_stddev(rnd);
    sign_sum += a;
    random_sum += b;
    detail += "seed " + s + ": " + fmt("%.2f", a) + " vs " + fmt("%.2f", b) + "; ";
  }
  return {sign_sum <= random_sum, detail + "mean std sign-product " + fmt("%.2f", sign_sum / 3) + " <= random " +
                                      fmt("%.2f", random_sum / 3)};
}

}  // namespace

int main(int argc, char** argv) {
  bool cifar = false;
  for (int i = 1; i < argc; ++i)
    if (std::string(argv[i]) == "--cifar") cifar = true;

  g_scratch = fs::temp_directory_path() / ("feedalign_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(g_scratch);
  int failures = 0;

  if (cifar) {
    const char* env = std::getenv("FEEDALIGN_CIFAR10_DIR");
    if (!env || !has_cifar10(env)) {
      std::cout << "NOT RUN  [7] [8]: CIFAR-10 binaries not found (set FEEDALIGN_CIFAR10_DIR)" << std::endl;
      fs::remove_all(g_scratch);
      return kSkip;
    }
    const fs::path dir(env);
    failures += report(7, "smallcnn-cifar10 trend, cbdfa vs bp", [&] { return trend_check(dir); });
    failures += report(8, "large-lr stability, sign-product vs random", [&] { return stability_check(dir); });
  } else {
    const std::string exe = FEEDALIGN_CLI_PATH;
    failures += report(1, "toy net gradient check", gradient_oracle);
    failures += report(2, "product feedback equals backprop on linear stacks", product_identity);
    failures += report(3, "packed binary projection equals dense +-1", binary_equivalence);
    failures += report(4, "binary feedback storage reduction", memory_claim);
    failures += report(5, "feedback frozen during training", frozen_feedback);
    failures += report(6, "mlp-moons convergence", moons_convergence);
    failures += report(9, "determinism across thread counts", [&] { return thread_determinism(exe); });
    failures += report(10, "direct error order independence", order_independence);
  }
  fs::remove_all(g_scratch);
  std::cout << (failures ? "acceptance: " + std::to_string(failures) + " criteria failed" : std::string("acceptance: all passed"))
            << std::endl;
  return failures ? 1 : 0;
}
