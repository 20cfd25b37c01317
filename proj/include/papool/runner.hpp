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

#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "papool/config.hpp"
#include "papool/data.hpp"
#include "papool/model.hpp"
#include "papool/train.hpp"

namespace papool {

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double test_acc = 0.0;
};

nlohmann::json to_json(const EpochRecord& r);

struct RunOptions {
  std::size_t threads = 0;
  std::optional<std::filesystem::path> checkpoint_path;  // rewritten after every epoch
  std::ostream* metrics_log = nullptr;                   // one JSON object per line
  std::ostream* progress = nullptr;                      // human-readable lines
  const Checkpoint* resume = nullptr;
  std::size_t stop_after = 0;  // stop once this many epochs are complete (0: run to the end)
};

struct RunResult {
  Model model;
  TrainState state;
  std::vector<EpochRecord> trace;
  EvalMetrics final_test;
};

/// Trains from scratch (or from `resume`) to config.optimizer.epochs and
/// evaluates on `test` after every epoch.
RunResult run_training(const RunConfig& config, const Dataset& train, const Dataset& test,
                       const RunOptions& options = {});

/// Metadata stored with every checkpoint: tool version, config and digest.
nlohmann::json checkpoint_metadata(const RunConfig& config);

/// Rebuilds the model (and run config) recorded in a checkpoint.
Model model_from_checkpoint(const Checkpoint& ckpt, RunConfig* config_out = nullptr);

struct AblationRow {
  std::string axis;
  std::string variant;
  double test_accuracy = 0.0;
  double train_loss = 0.0;
  std::string config_digest;
};

/// Normalization rows, in order: none, sigmoid, tanh, logsoftmax,
/// softmax-agnostic, softmax-channelwise.
std::vector<std::string> normalization_variants();
RunConfig apply_normalization_variant(RunConfig config, const std::string& variant);
/// Encoder depth d means d linear layers (d - 1 hidden layers of the base width).
RunConfig apply_encoder_depth(RunConfig config, std::size_t depth);

/// Trains one model per variant with identical seeds and data.
std::vector<AblationRow> run_ablation(const RunConfig& base, const Dataset& train, const Dataset& test,
                                      const std::string& axis, std::size_t depth_min, std::size_t depth_max,
                                      std::size_t threads = 0, std::ostream* progress = nullptr);

}  // namespace papool
