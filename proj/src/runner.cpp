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

#include "papool/runner.hpp"

#include <cctype>
#include <cstdio>
#include <ostream>

#include "papool/errors.hpp"

namespace papool {

using json = nlohmann::json;

json to_json(const EpochRecord& r) {
  return {{"epoch", r.epoch}, {"train_loss", r.train_loss}, {"train_acc", r.train_acc}, {"test_acc", r.test_acc}};
}

json checkpoint_metadata(const RunConfig& config) {
  return {{"tool", kToolVersion}, {"config", to_json(config)}, {"config_digest", config_digest(config)}};
}

Model model_from_checkpoint(const Checkpoint& ckpt, RunConfig* config_out) {
  if (!ckpt.metadata.contains("config")) throw FormatError("checkpoint metadata has no config");
  const auto config = run_config_from_json(ckpt.metadata.at("config"));
  Model model = Model::create(config.model, config.optimizer.seed);
  TrainState ignored;
  restore_checkpoint(ckpt, model, ignored);
  if (config_out) *config_out = config;
  return model;
}

RunResult run_training(const RunConfig& config, const Dataset& train, const Dataset& test, const RunOptions& options) {
  config.validate();
  RunResult result{Model::create(config.model, config.optimizer.seed), TrainState{}, {}, {}};
  if (options.resume) restore_checkpoint(*options.resume, result.model, result.state);

  TrainOptions train_options;
  train_options.augment = config.data.augment;
  train_options.augment_options = config.data.augment_options;
  train_options.threads = options.threads;

  const auto digest = config_digest(config);
  while (result.state.epoch < config.optimizer.epochs) {
    if (options.stop_after && result.state.epoch >= options.stop_after) break;
    const auto m = train_epoch(result.model, train, config.optimizer, result.state, train_options);
    result.final_test = evaluate(result.model, test, options.threads);
    const EpochRecord record{m.epoch, m.loss, m.accuracy, result.final_test.accuracy};
    result.trace.push_back(record);

    if (options.metrics_log) {
      auto line = to_json(record);
      line["config_digest"] = digest;
      *options.metrics_log << line.dump() << '\n' << std::flush;
    }
    if (options.progress) {
      char buf[160];
      std::snprintf(buf, sizeof(buf), "epoch %3zu  loss %.4f  train_acc %.4f  test_acc %.4f\n", record.epoch,
                    record.train_loss, record.train_acc, record.test_acc);
      *options.progress << buf << std::flush;
    }
    if (options.checkpoint_path) {
      auto meta = checkpoint_metadata(config);
      meta["test_accuracy"] = record.test_acc;
      meta["train_loss"] = record.train_loss;
      meta["rng"] = {{"root_seed", config.optimizer.seed}, {"next_epoch", result.state.epoch}};
      save_checkpoint(*options.checkpoint_path, make_checkpoint(result.model, result.state, meta));
    }
  }
  if (result.trace.empty()) result.final_test = evaluate(result.model, test, options.threads);
  return result;
}

std::vector<std::string> normalization_variants() {
  return {"none", "sigmoid", "tanh", "logsoftmax", "softmax-agnostic", "softmax-channelwise"};
}

RunConfig apply_normalization_variant(RunConfig config, const std::string& variant) {
  auto& p = config.model.papool;
  config.model.pooling = PoolingKind::papool;
  p.weight_mode = WeightMode::channel_wise;
  if (variant == "softmax-agnostic") {
    p.normalization = Normalization::softmax;
    p.weight_mode = WeightMode::channel_agnostic;
  } else if (variant == "softmax-channelwise") {
    p.normalization = Normalization::softmax;
  } else {
    p.normalization = parse_normalization(variant);
  }
  return config;
}

RunConfig apply_encoder_depth(RunConfig config, std::size_t depth) {
  if (depth < 1) throw ConfigError("encoder depth must be >= 1");
  auto& p = config.model.papool;
  config.model.pooling = PoolingKind::papool;
  const std::size_t width = p.hidden.empty() ? 32 : p.hidden.front();
  p.hidden.assign(depth - 1, width);
  return config;
}

std::vector<AblationRow> run_ablation(const RunConfig& base, const Dataset& train, const Dataset& test,
                                      const std::string& axis, std::size_t depth_min, std::size_t depth_max,
                                      std::size_t threads, std::ostream* progress) {
  std::vector<std::pair<std::string, RunConfig>> variants;
  if (axis == "normalization" || axis == "all") {
    for (const auto& v : normalization_variants()) variants.emplace_back(v, apply_normalization_variant(base, v));
  }
  if (axis == "encoders" || axis == "all") {
    if (depth_min < 1 || depth_max < depth_min) throw ValidationError("encoder range must satisfy 1 <= lo <= hi");
    for (std::size_t d = depth_min; d <= depth_max; ++d) {
      variants.emplace_back(std::to_string(d), apply_encoder_depth(base, d));
    }
  }
  if (variants.empty()) throw ValidationError("unknown ablation axis '" + axis + "'");

  std::vector<AblationRow> rows;
  for (const auto& [name, cfg] : variants) {
    RunOptions opts;
    opts.threads = threads;
    const auto result = run_training(cfg, train, test, opts);
    const bool is_depth = !name.empty() && std::isdigit(static_cast<unsigned char>(name[0]));
    AblationRow row{is_depth ? "encoders" : "normalization", name, result.final_test.accuracy,
                    result.trace.empty() ? 0.0 : result.trace.back().train_loss, config_digest(cfg)};
    if (progress) {
      *progress << row.axis << ' ' << row.variant << ": test_acc " << row.test_accuracy << '\n' << std::flush;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace papool
