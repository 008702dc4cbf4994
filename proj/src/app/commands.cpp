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

#include "feedalign/app/commands.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>

#include "feedalign/app/presets.hpp"
#include "feedalign/checkpoint.hpp"
#include "feedalign/data.hpp"
#include "feedalign/diagnostics.hpp"
#include "feedalign/errors.hpp"
#include "feedalign/random.hpp"

namespace feedalign::app {
namespace {

constexpr std::uint64_t kStreamTrainData = 10;
constexpr std::uint64_t kStreamTestData = 11;

struct Splits {
  Dataset train;
  Dataset test;
  std::optional<ChannelStats> stats;
};

Dataset random_dataset(const Shape& sample_shape, std::size_t classes, std::size_t n, std::uint64_t seed) {
  Dataset d;
  d.name = "random";
  d.sample_shape = sample_shape;
  d.class_count = classes;
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  d.features.resize(n * shape_size(sample_shape));
  for (auto& v : d.features) v = normal(rng);
  std::uniform_int_distribution<std::int32_t> label(0, static_cast<std::int32_t>(classes) - 1);
  d.labels.resize(n);
  for (auto& l : d.labels) l = label(rng);
  return d;
}

Splits load_data(const RunConfig& cfg, const NetworkSpec& spec) {
  Splits s;
  if (cfg.dataset == "moons") {
    s.train = two_moons(cfg.synthetic_train, cfg.synthetic_noise, derive_seed(cfg.seed, kStreamTrainData));
    s.test = two_moons(cfg.synthetic_test, cfg.synthetic_noise, derive_seed(cfg.seed, kStreamTestData));
  } else if (cfg.dataset == "random") {
    s.train = random_dataset(spec.input_shape, spec.class_count(), cfg.synthetic_train,
                             derive_seed(cfg.seed, kStreamTrainData));
    s.test = random_dataset(spec.input_shape, spec.class_count(), cfg.synthetic_test,
                            derive_seed(cfg.seed, kStreamTestData));
  } else {
    if (cfg.data_dir.empty()) throw DataError("dataset " + cfg.dataset + " needs --data-dir");
    const bool c10 = cfg.dataset == "cifar10";
    s.train = c10 ? load_cifar10_split(cfg.data_dir, Split::kTrain) : load_cifar100_split(cfg.data_dir, Split::kTrain);
    s.test = c10 ? load_cifar10_split(cfg.data_dir, Split::kTest) : load_cifar100_split(cfg.data_dir, Split::kTest);
  }
  if (cfg.train_subset) s.train = s.train.head(std::min(cfg.train_subset, s.train.size()));
  if (cfg.test_subset) s.test = s.test.head(std::min(cfg.test_subset, s.test.size()));
  if (s.train.sample_shape != spec.input_shape) {
    throw DataError("dataset samples are " + shape_str(s.train.sample_shape) + ", preset " + spec.name +
                    " expects " + shape_str(spec.input_shape));
  }
  if (s.train.class_count != spec.class_count()) {
    throw DataError("dataset has " + std::to_string(s.train.class_count) + " classes, preset " + spec.name +
                    " has " + std::to_string(spec.class_count()) + " outputs");
  }
  if (cfg.standardize) {
    s.stats = channel_stats(s.train);
    standardize(s.train, *s.stats);
    standardize(s.test, *s.stats);
  }
  return s;
}

NetworkSpec network_spec(const RunConfig& cfg) {
  NetworkSpec spec = preset_network(cfg.preset);
  spec.fc_strategy = cfg.strategy;
  spec.feedback_init = {cfg.effective_feedback(), derive_seed(cfg.seed, kStreamFeedback)};
  spec.precision = cfg.precision;
  spec.refresh_feedback = cfg.refresh_feedback;
  spec.validate();
  return spec;
}

void prepare_out(const RunConfig& cfg) {
  std::error_code ec;
  std::filesystem::create_directories(cfg.out, ec);
  if (ec || !std::filesystem::is_directory(cfg.out)) {
    throw ConfigError("cannot create output directory " + cfg.out.string());
  }
}

std::ofstream open_out(const RunConfig& cfg, const std::string& name) {
  std::ofstream os(cfg.out / name, std::ios::binary | std::ios::trunc);
  if (!os) throw ConfigError("cannot write " + (cfg.out / name).string());
  return os;
}

std::string fmt(double v, const char* spec = "%.9g") {
  char buf[40];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

void write_echo(const RunConfig& cfg, const Splits& data) {
  auto os = open_out(cfg, "config.echo");
  os << echo_config(cfg);
  if (data.stats) {
    os << "# standardization statistics of the training split\n";
    for (std::size_t c = 0; c < data.stats->mean.size(); ++c) {
      os << "# channel " << c << " mean = " << fmt(data.stats->mean[c]) << " stddev = "
         << fmt(data.stats->stddev[c]) << '\n';
    }
  }
}

void metrics_row(std::ostream& os, std::size_t epoch, const char* phase, const Metrics& m, double lr,
                 double wall_ms) {
  os << epoch << ',' << phase << ',' << fmt(m.loss) << ',' << fmt(m.top1) << ',' << fmt(m.top5) << ','
     << fmt(lr) << ',' << fmt(wall_ms, "%.0f") << '\n';
}

// Shared epoch loop of train and align. Returns the last test metrics.
template <typename T>
Metrics run_epochs(const RunConfig& cfg, Trainer<T>& trainer, const Splits& data, std::ostream& out) {
  auto csv = open_out(cfg, "metrics.csv");
  csv << "epoch,phase,loss,top1,top5,lr,wall_ms\n";
  Metrics test;
  for (std::size_t e = 0; e < cfg.hyper.epochs; ++e) {
    const double lr = trainer.lr_for_epoch(e);
    const auto t0 = std::chrono::steady_clock::now();
    const Metrics train = trainer.train_epoch(data.train);
    const auto t1 = std::chrono::steady_clock::now();
    test = trainer.evaluate(data.test);
    const double ms =
        cfg.record_time ? std::chrono::duration<double, std::milli>(t1 - t0).count() : 0.0;
    metrics_row(csv, e + 1, "train", train, lr, ms);
    metrics_row(csv, e + 1, "test", test, lr, 0.0);
    csv.flush();
    out << "epoch " << e + 1 << ": train loss " << fmt(train.loss, "%.4f") << " top1 "
        << fmt(train.top1, "%.2f") << " | test top1 " << fmt(test.top1, "%.2f") << " top5 "
        << fmt(test.top5, "%.2f") << '\n';
  }
  return test;
}

template <typename T>
int train_impl(const RunConfig& cfg, std::ostream& out) {
  const NetworkSpec spec = network_spec(cfg);
  prepare_out(cfg);
  const Splits data = load_data(cfg, spec);
  Network<T> net(spec, cfg.seed);
  Hyperparams hyper = cfg.hyper;
  hyper.seed = cfg.seed;
  Trainer<T> trainer(net, hyper);
  write_echo(cfg, data);
  const Metrics test = run_epochs(cfg, trainer, data, out);
  save_checkpoint(cfg.out / "checkpoint.bin", net, &trainer.state());
  out << "final test top1 " << fmt(test.top1, "%.2f") << " top5 " << fmt(test.top5, "%.2f") << '\n';
  return kExitOk;
}

template <typename T>
int align_impl(const RunConfig& cfg, std::ostream& out) {
  const NetworkSpec spec = network_spec(cfg);
  prepare_out(cfg);
  const Splits data = load_data(cfg, spec);
  Network<T> net(spec, cfg.seed);
  Hyperparams hyper = cfg.hyper;
  hyper.seed = cfg.seed;
  Trainer<T> trainer(net, hyper);
  write_echo(cfg, data);
  auto csv = open_out(cfg, "alignment.csv");
  csv << "layer,metric,value\n";
  std::size_t degenerate = 0;
  trainer.set_pre_update_hook([&](std::uint64_t step) {
    if (step % cfg.align_every != 0) return;
    const AlignmentReport r = measure_alignment(net, step);
    for (const auto& l : r.layers) {
      const char* metric = l.degenerate ? "degenerate@" : "cosine@";
      csv << l.layer << ',' << metric << step << ',' << fmt(l.cosine) << '\n';
      degenerate += l.degenerate ? 1 : 0;
    }
  });
  run_epochs(cfg, trainer, data, out);
  out << "alignment rows written to " << (cfg.out / "alignment.csv").string();
  if (degenerate) out << " (" << degenerate << " zero-gradient rows flagged)";
  out << '\n';
  return kExitOk;
}

int checkgrad_impl(const RunConfig& cfg, std::ostream& out) {
  RunConfig c = cfg;
  c.strategy = Strategy::kBP;
  c.feedback_init.reset();
  const NetworkSpec spec = network_spec(c);
  prepare_out(cfg);
  Network<double> net(spec, cfg.seed);
  const Dataset batch = random_dataset(spec.input_shape, spec.class_count(), cfg.gradcheck_batch,
                                       derive_seed(cfg.seed, kStreamTrainData));
  std::vector<std::size_t> idx(batch.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  const auto x = gather_features<double>(batch, idx);
  const auto y = gather_labels(batch, idx);
  const GradCheckReport r =
      check_gradients(net, x, y, cfg.gradcheck_epsilon, cfg.gradcheck_entries, cfg.corrupt_scale);
  auto csv = open_out(cfg, "gradcheck.csv");
  write_gradcheck_csv(csv, r);
  {
    auto echo = open_out(cfg, "config.echo");
    echo << echo_config(cfg);
  }
  if (r.entries.empty()) throw NumericError("gradient check probed no entries");
  const auto& w = r.entries[r.worst];
  out << "checked " << r.entries.size() << " entries; worst relative error " << fmt(r.worst_rel_error, "%.3e")
      << " at " << w.param << '[' << w.index << "] (analytic " << fmt(w.analytic, "%.10g") << ", numeric "
      << fmt(w.numeric, "%.10g") << ")\n";
  if (!r.passed(cfg.gradcheck_tolerance)) {
    out << "FAIL: exceeds tolerance " << fmt(cfg.gradcheck_tolerance, "%.1e") << '\n';
    return kExitNumeric;
  }
  out << "PASS\n";
  return kExitOk;
}

template <typename T>
int memreport_impl(const RunConfig& cfg, std::ostream& out) {
  const NetworkSpec spec = network_spec(cfg);
  prepare_out(cfg);
  Network<T> net(spec, cfg.seed);
  const MemoryReport r = memory_report(net);
  auto csv = open_out(cfg, "memory.csv");
  write_memory_csv(csv, r);
  {
    auto echo = open_out(cfg, "config.echo");
    echo << echo_config(cfg);
  }
  out << "strategy " << strategy_name(cfg.strategy) << ", feedback storage " << r.total_feedback_bytes
      << " bytes\n";
  for (const auto& row : r.feedback) {
    out << row.layer << ": " << row.rows << "x" << row.cols << " stored " << row.stored_bytes
        << " B, dense 32-bit " << row.dense32_bytes << " B, packed " << row.packed_bytes
        << " B, reduction " << format_percent(row.reduction) << "%\n";
  }
  return kExitOk;
}

template <template <typename> class Fn>
int dispatch(const RunConfig& cfg, std::ostream& out) {
  return cfg.precision == Precision::kFloat64 ? Fn<double>{}(cfg, out) : Fn<float>{}(cfg, out);
}

template <typename T>
struct TrainFn {
  int operator()(const RunConfig& c, std::ostream& o) const { return train_impl<T>(c, o); }
};
template <typename T>
struct AlignFn {
  int operator()(const RunConfig& c, std::ostream& o) const { return align_impl<T>(c, o); }
};
template <typename T>
struct MemFn {
  int operator()(const RunConfig& c, std::ostream& o) const { return memreport_impl<T>(c, o); }
};

// Raw flag values; unset flags leave the preset / config file value alone.
struct Flags {
  std::string preset, config, strategy, feedback_init, data_dir, out, precision;
  std::optional<double> lr, momentum, weight_decay, corrupt_scale;
  std::optional<std::size_t> batch, epochs, train_subset, test_subset, align_every;
  std::optional<std::uint64_t> seed;
  bool augment = false, record_time = false, refresh_feedback = false;
  std::vector<std::string> settings;
};

void add_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--preset", f.preset, "Network and data preset");
  cmd->add_option("--config", f.config, "Config file of key = value lines");
  cmd->add_option("--strategy", f.strategy, "bp | fa | dfa | cdfa | bdfa | cbdfa");
  cmd->add_option("--feedback-init", f.feedback_init, "random | random-uniform | product | sign-product");
  cmd->add_option("--lr", f.lr, "Base learning rate");
  cmd->add_option("--batch", f.batch, "Mini-batch size");
  cmd->add_option("--epochs", f.epochs, "Training epochs");
  cmd->add_option("--momentum", f.momentum, "SGD momentum");
  cmd->add_option("--weight-decay", f.weight_decay, "L2 weight decay");
  cmd->add_flag("--augment", f.augment, "Random flips and crops");
  cmd->add_option("--seed", f.seed, "Run seed");
  cmd->add_option("--out", f.out, "Output directory");
  cmd->add_option("--data-dir", f.data_dir, "Directory holding the CIFAR binaries");
  cmd->add_option("--train-subset", f.train_subset, "Use the first N training images");
  cmd->add_option("--test-subset", f.test_subset, "Use the first N test images");
  cmd->add_option("--precision", f.precision, "32 | 64");
  cmd->add_option("--align-every", f.align_every, "Steps between alignment samples");
  cmd->add_flag("--record-time", f.record_time, "Write wall-clock times into metrics.csv");
  cmd->add_flag("--refresh-feedback", f.refresh_feedback, "Rebuild feedback every epoch");
  cmd->add_option("--set", f.settings, "Any config key as key=value (repeatable)");
  cmd->add_option("--corrupt-scale", f.corrupt_scale)->group("");
}

RunConfig resolve(const Flags& f, const std::string& default_preset) {
  std::vector<std::pair<std::string, std::string>> file;
  if (!f.config.empty()) file = read_config_file(f.config);
  std::string preset = default_preset;
  for (const auto& [k, v] : file)
    if (k == "preset") preset = v;
  if (!f.preset.empty()) preset = f.preset;
  if (preset.empty()) throw ConfigError("no preset given (use --preset or a preset line in --config)");

  RunConfig cfg = preset_config(preset);
  for (const auto& [k, v] : file)
    if (k != "preset") apply_setting(cfg, k, v);
  for (const auto& kv : f.settings) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    const std::string key = kv.substr(0, eq);
    if (key == "preset") throw ConfigError("use --preset to choose a preset");
    apply_setting(cfg, key, kv.substr(eq + 1));
  }
  if (!f.strategy.empty()) apply_setting(cfg, "strategy", f.strategy);
  if (!f.feedback_init.empty()) apply_setting(cfg, "feedback_init", f.feedback_init);
  if (!f.data_dir.empty()) cfg.data_dir = f.data_dir;
  if (!f.out.empty()) cfg.out = f.out;
  if (!f.precision.empty()) apply_setting(cfg, "precision", f.precision);
  if (f.lr) cfg.hyper.lr = *f.lr;
  if (f.momentum) cfg.hyper.momentum = *f.momentum;
  if (f.weight_decay) cfg.hyper.weight_decay = *f.weight_decay;
  if (f.corrupt_scale) cfg.corrupt_scale = *f.corrupt_scale;
  if (f.batch) cfg.hyper.batch = *f.batch;
  if (f.epochs) cfg.hyper.epochs = *f.epochs;
  if (f.train_subset) cfg.train_subset = *f.train_subset;
  if (f.test_subset) cfg.test_subset = *f.test_subset;
  if (f.align_every) cfg.align_every = *f.align_every;
  if (f.seed) cfg.seed = *f.seed;
  if (f.augment) cfg.hyper.augment.enabled = true;
  if (f.record_time) cfg.record_time = true;
  if (f.refresh_feedback) cfg.refresh_feedback = true;
  cfg.validate();
  return cfg;
}

}  // namespace

int cmd_train(const RunConfig& cfg, std::ostream& out) { return dispatch<TrainFn>(cfg, out); }
int cmd_align(const RunConfig& cfg, std::ostream& out) { return dispatch<AlignFn>(cfg, out); }
int cmd_memreport(const RunConfig& cfg, std::ostream& out) { return dispatch<MemFn>(cfg, out); }
int cmd_checkgrad(const RunConfig& cfg, std::ostream& out) { return checkgrad_impl(cfg, out); }

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Train networks with back-propagation or fixed-feedback alignment", "feedalign"};
  app.require_subcommand(1);
  Flags flags;
  auto* train = app.add_subcommand("train", "Train and write metrics.csv, checkpoint.bin, config.echo");
  auto* checkgrad = app.add_subcommand("checkgrad", "Compare BP gradients with finite differences (64-bit)");
  auto* align = app.add_subcommand("align", "Train while logging BP-vs-strategy gradient cosines");
  auto* memreport = app.add_subcommand("memreport", "Report feedback storage per FC layer");
  for (auto* c : {train, checkgrad, align, memreport}) add_flags(c, flags);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (train->parsed()) return cmd_train(resolve(flags, ""), out);
    if (align->parsed()) return cmd_align(resolve(flags, ""), out);
    if (memreport->parsed()) return cmd_memreport(resolve(flags, ""), out);
    if (checkgrad->parsed()) return cmd_checkgrad(resolve(flags, "toy-gradcheck"), out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return kExitUsage;
}

}  // namespace feedalign::app
