// Copyright 2026 The papool Authors
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

#include "papool/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "papool/bench.hpp"
#include "papool/config.hpp"
#include "papool/data.hpp"
#include "papool/errors.hpp"
#include "papool/gradcheck.hpp"
#include "papool/runner.hpp"

namespace papool {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// Holds an exclusive lock file for the lifetime of a write into a data directory.
class DirectoryLock {
 public:
  explicit DirectoryLock(const fs::path& dir) : path_(dir / ".papool.lock") {
    std::FILE* f = std::fopen(path_.c_str(), "wx");
    if (!f) throw ValidationError("cannot lock '" + dir.string() + "' (in use or not writable)");
    std::fclose(f);
  }
  ~DirectoryLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;

 private:
  fs::path path_;
};

fs::path manifest_path(const std::string& data) {
  if (data.empty()) throw ValidationError("no dataset given (use --data)");
  fs::path p(data);
  if (fs::is_directory(p)) p /= std::string(kManifestName);
  if (!fs::exists(p)) throw ValidationError("no manifest at '" + p.string() + "'");
  return p;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ValidationError("cannot write '" + path.string() + "'");
  os << text;
}

std::optional<std::uint64_t> env_seed() {
  if (const char* s = std::getenv("PAPOOL_SEED")) {
    char* end = nullptr;
    const auto v = std::strtoull(s, &end, 10);
    if (end && *end == '\0' && end != s) return v;
    throw ValidationError("PAPOOL_SEED must be a non-negative integer");
  }
  return std::nullopt;
}

std::pair<std::size_t, std::size_t> parse_range(const std::string& text) {
  const auto dots = text.find("..");
  try {
    if (dots == std::string::npos) {
      const auto v = std::stoul(text);
      return {v, v};
    }
    return {std::stoul(text.substr(0, dots)), std::stoul(text.substr(dots + 2))};
  } catch (const std::exception&) {
    throw ValidationError("bad range '" + text + "' (expected LO..HI)");
  }
}

// Config assembly: defaults < config file (with PAPOOL_SEED replacing the
// built-in seed) < flags.
struct ConfigFlags {
  std::string config_file;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> pooling;
  std::optional<std::string> normalization;
  std::optional<std::string> optimizer;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> batch_size;
  std::optional<double> lr;
  std::string data;

  void add_to(CLI::App* app, bool with_model_flags) {
    app->add_option("--config", config_file, "JSON run configuration")->check(CLI::ExistingFile);
    app->add_option("--seed", seed, "Root seed (default: $PAPOOL_SEED or 0)");
    app->add_option("--data", data, "Dataset directory or manifest path");
    app->add_option("--epochs", epochs, "Training epochs");
    if (with_model_flags) {
      app->add_option("--pooling", pooling, "max | avg | papool");
      app->add_option("--normalization", normalization, "softmax | logsoftmax | sigmoid | tanh | none");
      app->add_option("--optimizer", optimizer, "adam | sgd_momentum");
      app->add_option("--batch-size", batch_size, "Batch size");
      app->add_option("--lr", lr, "Learning rate");
    }
  }

  RunConfig build() const {
    RunConfig config;
    if (auto s = env_seed()) config.optimizer.seed = *s;
    if (!config_file.empty()) {
      std::ifstream is(config_file);
      json j;
      try {
        j = json::parse(is);
      } catch (const json::exception& e) {
        throw ConfigError("config '" + config_file + "' is not valid JSON: " + e.what());
      }
      const bool file_has_seed = j.is_object() && j.contains("seed");
      const auto env = config.optimizer.seed;
      config = run_config_from_json(j);
      if (!file_has_seed) config.optimizer.seed = env;
    }
    if (seed) config.optimizer.seed = *seed;
    if (pooling) config.model.pooling = parse_pooling_kind(*pooling);
    if (normalization) config.model.papool.normalization = parse_normalization(*normalization);
    if (optimizer) config.optimizer.kind = parse_optimizer_kind(*optimizer);
    if (epochs) config.optimizer.epochs = *epochs;
    if (batch_size) config.optimizer.batch_size = *batch_size;
    if (lr) config.optimizer.lr = *lr;
    if (!data.empty()) config.data.dir = data;
    config.validate();
    return config;
  }
};

int cmd_gen_data(const fs::path& out_dir, GenerateOptions opts, std::optional<std::uint64_t> seed, std::ostream& out) {
  if (seed) {
    opts.seed = *seed;
  } else if (auto s = env_seed()) {
    opts.seed = *s;
  }
  fs::create_directories(out_dir);
  DirectoryLock lock(out_dir);
  const auto manifest = generate_dataset(out_dir, opts);
  const json info{{"tool", kToolVersion},
                  {"classes", opts.classes},
                  {"train_per_class", opts.train_per_class},
                  {"test_per_class", opts.test_per_class},
                  {"points", opts.points},
                  {"noise_sigma", opts.noise_sigma},
                  {"seed", opts.seed}};
  json stamped = info;
  stamped["config_digest"] = digest_of(info);
  write_text(out_dir / "generation.json", stamped.dump(2) + "\n");
  std::size_t train = 0;
  for (const auto& s : manifest.samples) train += s.split == "train" ? 1 : 0;
  out << "wrote " << manifest.samples.size() << " samples (" << train << " train, " << manifest.samples.size() - train
      << " test) in " << manifest.classes.size() << " classes to " << out_dir.string() << '\n';
  return kExitOk;
}

int cmd_train(const ConfigFlags& flags, const fs::path& out_dir, const std::string& resume, std::size_t stop_after,
              std::size_t threads, std::ostream& out) {
  std::optional<Checkpoint> ckpt;
  RunConfig config;
  if (!resume.empty()) {
    ckpt = load_checkpoint(resume);
    if (!ckpt->metadata.contains("config")) throw FormatError("checkpoint has no run config");
    config = run_config_from_json(ckpt->metadata.at("config"));
  } else {
    config = flags.build();
  }
  const auto data_dir = flags.data.empty() ? config.data.dir : flags.data;
  const auto manifest = manifest_path(data_dir);
  const auto train = load_split(manifest, "train");
  const auto test = load_split(manifest, "test");
  if (train.classes.size() != config.model.classes) {
    throw ConfigError("dataset has " + std::to_string(train.classes.size()) + " classes, model expects " +
                      std::to_string(config.model.classes));
  }

  fs::create_directories(out_dir);
  const auto digest = config_digest(config);
  write_text(out_dir / "config.json", to_json(config).dump(2) + "\n");
  std::ofstream log(out_dir / "metrics.jsonl", resume.empty() ? std::ios::trunc : std::ios::app);
  if (!log) throw ValidationError("cannot write metrics log in '" + out_dir.string() + "'");

  RunOptions opts;
  opts.threads = threads;
  opts.checkpoint_path = out_dir / "checkpoint.papk";
  opts.metrics_log = &log;
  opts.progress = &out;
  opts.resume = ckpt ? &*ckpt : nullptr;
  opts.stop_after = stop_after;
  out << kToolVersion << "  config " << digest << "  pooling " << to_string(config.model.pooling) << '\n';
  const auto result = run_training(config, train, test, opts);

  json final{{"tool", kToolVersion},
             {"config_digest", digest},
             {"epochs_completed", result.state.epoch},
             {"test", to_json(result.final_test)}};
  if (!result.trace.empty()) final["final"] = to_json(result.trace.back());
  write_text(out_dir / "final_metrics.json", final.dump(2) + "\n");
  return kExitOk;
}

int cmd_eval(const std::string& checkpoint, const std::string& data, const std::string& split, const std::string& out_file,
             std::size_t threads, std::ostream& out) {
  if (!fs::exists(checkpoint)) throw ValidationError("checkpoint '" + checkpoint + "' not found");
  const auto ckpt = load_checkpoint(checkpoint);
  RunConfig config;
  const Model model = model_from_checkpoint(ckpt, &config);
  const auto dataset = load_split(manifest_path(data.empty() ? config.data.dir : data), split);
  const auto metrics = evaluate(model, dataset, threads);
  json j = to_json(metrics);
  j["tool"] = kToolVersion;
  j["config_digest"] = config_digest(config);
  j["split"] = split;
  j["classes"] = dataset.classes;
  j["samples"] = dataset.samples.size();
  j["checkpoint_epoch"] = ckpt.metadata.value("epoch", std::size_t{0});
  if (ckpt.metadata.contains("test_accuracy")) j["recorded_test_accuracy"] = ckpt.metadata.at("test_accuracy");
  const auto text = j.dump(2) + "\n";
  if (out_file.empty()) {
    out << text;
  } else {
    write_text(out_file, text);
  }
  return kExitOk;
}

int cmd_gradcheck(const std::string& op, std::size_t seeds, const std::string& out_file, std::ostream& out) {
  const auto results = run_gradcheck_suite(op, seeds);
  bool all = true;
  json ops = json::array();
  for (const auto& r : results) {
    all = all && r.passed;
    ops.push_back({{"op", r.op}, {"max_rel_error", r.max_rel_error}, {"seeds", r.seeds}, {"passed", r.passed}});
  }
  const json report{{"tool", kToolVersion}, {"tolerance", kGradCheckTolerance}, {"ops", ops}, {"passed", all}};
  const auto text = report.dump(2) + "\n";
  if (out_file.empty()) {
    out << text;
  } else {
    write_text(out_file, text);
  }
  return all ? kExitOk : kExitInternal;
}

int cmd_ablate(const ConfigFlags& flags, const std::string& axis, const std::string& range, const std::string& format,
               const std::string& out_file, std::size_t threads, std::ostream& out) {
  if (format != "json" && format != "csv") throw ValidationError("ablate --format must be json or csv");
  const auto config = flags.build();
  const auto manifest = manifest_path(config.data.dir);
  const auto train = load_split(manifest, "train");
  const auto test = load_split(manifest, "test");
  const auto [lo, hi] = parse_range(range);
  const auto rows = run_ablation(config, train, test, axis, lo, hi, threads, nullptr);

  const auto digest = config_digest(config);
  out << "# " << kToolVersion << "  base config " << digest << '\n';
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-14s %-20s %9s %10s\n", "axis", "variant", "test_acc", "train_loss");
  out << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%-14s %-20s %9.4f %10.4f\n", r.axis.c_str(), r.variant.c_str(), r.test_accuracy,
                  r.train_loss);
    out << buf;
  }

  std::string text;
  if (format == "json") {
    json j{{"tool", kToolVersion}, {"config_digest", digest}, {"rows", json::array()}};
    for (const auto& r : rows) {
      j["rows"].push_back({{"axis", r.axis},
                           {"variant", r.variant},
                           {"test_accuracy", r.test_accuracy},
                           {"train_loss", r.train_loss},
                           {"config_digest", r.config_digest}});
    }
    text = j.dump(2) + "\n";
  } else {
    std::ostringstream os;
    os << "# " << kToolVersion << " config_digest=" << digest << '\n';
    os << "axis,variant,test_accuracy,train_loss,config_digest\n";
    for (const auto& r : rows) {
      std::snprintf(buf, sizeof(buf), "%s,%s,%.17g,%.17g,%s\n", r.axis.c_str(), r.variant.c_str(), r.test_accuracy,
                    r.train_loss, r.config_digest.c_str());
      os << buf;
    }
    text = os.str();
  }
  if (!out_file.empty()) write_text(out_file, text);
  return kExitOk;
}

int cmd_bench(const std::vector<std::size_t>& nps, const std::vector<std::size_t>& ks, const std::vector<std::size_t>& cs,
              std::size_t repeats, std::size_t warmup, std::uint64_t seed, const std::string& format,
              const std::string& out_file, std::ostream& out) {
  std::vector<BenchCase> grid;
  for (auto n_p : nps) {
    for (auto k : ks) {
      for (auto c : cs) grid.push_back({n_p, k, c});
    }
  }
  const auto fmt = parse_report_format(format);
  auto report = run_bench(grid, repeats, warmup, seed);
  report.config_digest = digest_of({{"n_p", nps}, {"k", ks}, {"c", cs}, {"repeats", repeats}, {"warmup", warmup}, {"seed", seed}});
  const auto text = emit_report(report, fmt);
  if (out_file.empty()) {
    out << text;
  } else {
    write_text(out_file, text);
    out << emit_report(report, ReportFormat::table);
  }
  return kExitOk;
}

int cmd_inspect_weights(const std::string& checkpoint, const std::string& cloud_file, std::size_t region,
                        const std::vector<std::size_t>& channels, std::size_t stage, std::size_t k,
                        const std::string& out_file, std::ostream& out) {
  if (!fs::exists(checkpoint)) throw ValidationError("checkpoint '" + checkpoint + "' not found");
  const auto ckpt = load_checkpoint(checkpoint);
  RunConfig config;
  const Model model = model_from_checkpoint(ckpt, &config);
  auto sample = read_xyz(cloud_file);
  const auto cloud = normalize_unit_sphere(sample.cloud);
  const auto graph = inspect_graph(model, cloud, stage, k);
  std::vector<std::size_t> chans = channels;
  if (chans.empty()) {
    for (std::size_t c = 0; c < graph.channels; ++c) chans.push_back(c);
  }
  const auto records = dump_weights(graph, region, chans);
  std::ostringstream os;
  os << "# " << kToolVersion << " config_digest=" << config_digest(config) << '\n';
  write_weights_csv(os, records);
  if (out_file.empty()) {
    out << os.str();
  } else {
    write_text(out_file, os.str());
  }
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Position-adaptive pooling toolkit for point clouds", "papool"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));
  std::size_t threads = 0;
  app.add_option("--threads", threads, "Worker threads (default: $PAPOOL_THREADS or all cores)");

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate the synthetic shape dataset");
  std::string gen_out;
  GenerateOptions gen_opts;
  std::optional<std::uint64_t> gen_seed;
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--classes", gen_opts.classes, "Number of shape classes (1-4)");
  gen->add_option("--train-per-class", gen_opts.train_per_class, "Training samples per class");
  gen->add_option("--test-per-class", gen_opts.test_per_class, "Test samples per class");
  gen->add_option("--points", gen_opts.points, "Points per cloud");
  gen->add_option("--noise", gen_opts.noise_sigma, "Gaussian jitter sigma");
  gen->add_option("--seed", gen_seed, "Root seed (default: $PAPOOL_SEED or 0)");

  // train
  auto* train = app.add_subcommand("train", "Train a classifier");
  ConfigFlags train_flags;
  train_flags.add_to(train, true);
  std::string train_out;
  std::string resume;
  std::size_t stop_after = 0;
  train->add_option("--out", train_out, "Output directory")->required();
  train->add_option("--resume", resume, "Checkpoint to resume from");
  train->add_option("--stop-after", stop_after, "Stop once this many epochs are complete");

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  std::string eval_ckpt;
  std::string eval_data;
  std::string eval_split = "test";
  std::string eval_out;
  eval->add_option("--checkpoint", eval_ckpt, "Checkpoint file")->required();
  eval->add_option("--data", eval_data, "Dataset directory or manifest path");
  eval->add_option("--split", eval_split, "train | test | all")->check(CLI::IsMember({"train", "test", "all"}));
  eval->add_option("--out", eval_out, "Write metrics JSON here instead of stdout");

  // gradcheck
  auto* grad = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  std::string grad_op;
  std::size_t grad_seeds = 20;
  std::string grad_out;
  grad->add_option("--op", grad_op, "Check a single operator");
  grad->add_option("--seeds", grad_seeds, "Random instances per operator");
  grad->add_option("--out", grad_out, "Write the JSON report here instead of stdout");

  // ablate
  auto* ablate = app.add_subcommand("ablate", "Normalization and encoder-depth ablations");
  ConfigFlags ablate_flags;
  ablate_flags.add_to(ablate, false);
  std::string axis = "all";
  std::string range = "1..5";
  std::string ablate_format = "json";
  std::string ablate_out;
  ablate->add_option("--axis", axis, "normalization | encoders | all")
      ->check(CLI::IsMember({"normalization", "encoders", "all"}));
  ablate->add_option("--range", range, "Encoder depth range LO..HI");
  ablate->add_option("--format", ablate_format, "json | csv");
  ablate->add_option("--out", ablate_out, "Machine-readable output file");

  // bench
  auto* bench = app.add_subcommand("bench", "Pooling operator micro-benchmarks");
  std::vector<std::size_t> nps{64, 256};
  std::vector<std::size_t> ks{16, 64};
  std::vector<std::size_t> cs{64, 128};
  std::size_t repeats = 30;
  std::size_t warmup = 5;
  std::uint64_t bench_seed = 0;
  std::string bench_format = "table";
  std::string bench_out;
  bench->add_option("--np", nps, "Region counts")->delimiter(',');
  bench->add_option("--k", ks, "Neighbor counts")->delimiter(',');
  bench->add_option("--c", cs, "Channel counts")->delimiter(',');
  bench->add_option("--repeats", repeats, "Timed repeats per operator (>= 30)");
  bench->add_option("--warmup", warmup, "Untimed warmup runs (>= 5)");
  bench->add_option("--seed", bench_seed, "Input seed");
  bench->add_option("--format", bench_format, "json | csv | table");
  bench->add_option("--out", bench_out, "Write the report here instead of stdout");

  // inspect-weights
  auto* inspect = app.add_subcommand("inspect-weights", "Dump neighbor weights of one region as CSV");
  std::string insp_ckpt;
  std::string insp_cloud;
  std::size_t insp_region = 0;
  std::vector<std::size_t> insp_channels;
  std::size_t insp_stage = 0;
  std::size_t insp_k = 0;
  std::string insp_out;
  inspect->add_option("--checkpoint", insp_ckpt, "Checkpoint of a papool model")->required();
  inspect->add_option("--cloud", insp_cloud, "XYZ point cloud")->required();
  inspect->add_option("--region", insp_region, "Region index");
  inspect->add_option("--channels", insp_channels, "Channel indices (default: all)")->delimiter(',');
  inspect->add_option("--stage", insp_stage, "Set-abstraction stage");
  inspect->add_option("--k", insp_k, "Neighbor count override (0: as trained)");
  inspect->add_option("--out", insp_out, "Write CSV here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (*gen) return cmd_gen_data(gen_out, gen_opts, gen_seed, out);
    if (*train) return cmd_train(train_flags, train_out, resume, stop_after, threads, out);
    if (*eval) return cmd_eval(eval_ckpt, eval_data, eval_split, eval_out, threads, out);
    if (*grad) return cmd_gradcheck(grad_op, grad_seeds, grad_out, out);
    if (*ablate) return cmd_ablate(ablate_flags, axis, range, ablate_format, ablate_out, threads, out);
    if (*bench) return cmd_bench(nps, ks, cs, repeats, warmup, bench_seed, bench_format, bench_out, out);
    if (*inspect) {
      return cmd_inspect_weights(insp_ckpt, insp_cloud, insp_region, insp_channels, insp_stage, insp_k, insp_out, out);
    }
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const FormatError& e) {
    err << "format error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitInternal;
}

}  // namespace papool
