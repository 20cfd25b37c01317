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
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "papool/data.hpp"
#include "papool/model.hpp"
#include "papool/optim.hpp"

namespace papool {

/// Worker count: PAPOOL_THREADS if set, else the hardware concurrency.
std::size_t default_thread_count();

/// Runs fn(i) for i in [0, n) on up to `threads` workers. fn must only write
/// to slots owned by i; the caller reduces results in index order.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

struct TrainState {
  std::size_t epoch = 0;  // epochs completed
  OptimizerState optimizer;
};

struct TrainOptions {
  bool augment = false;
  AugmentOptions augment_options;
  std::size_t threads = 0;  // 0 -> default_thread_count()
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double loss = 0.0;
  double accuracy = 0.0;
};

/// One seeded pass over the dataset; advances state.epoch.
///
/// Shuffling, dropout and augmentation draw from streams derived from
/// (seed, epoch, position), and per-sample gradients are reduced in batch
/// order, so results do not depend on the thread count.
EpochMetrics train_epoch(Model& model, const Dataset& data, const OptimizerConfig& config, TrainState& state,
                         const TrainOptions& options = {});

struct EvalMetrics {
  double accuracy = 0.0;
  std::vector<double> per_class;                    // NaN-free: classes without samples report 0
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
};

EvalMetrics metrics_from_predictions(std::span<const std::size_t> labels, std::span<const std::size_t> predictions,
                                     std::size_t classes);

std::vector<std::size_t> predict(const Model& model, const Dataset& data, std::size_t threads = 0);
EvalMetrics evaluate(const Model& model, const Dataset& data, std::size_t threads = 0);

nlohmann::json to_json(const EvalMetrics& m);

/// Named f32 tensors plus a JSON metadata blob.
struct Checkpoint {
  std::vector<std::pair<std::string, Tensor>> tensors;
  nlohmann::json metadata = nlohmann::json::object();

  const Tensor* find(const std::string& name) const;
};

inline constexpr std::uint8_t kCheckpointVersion = 1;

/// `PAPK`, u8 version, u32 tensor count, then per tensor a u32-length-prefixed
/// UTF-8 name, u32 rank, u32 dims and little-endian f32 values, then a
/// u32-length-prefixed JSON metadata blob.
std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(std::string_view bytes);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Parameters under `param/`, optimizer buffers under `opt/m/` and `opt/v/`,
/// epoch and step in the metadata (merged into `metadata`).
Checkpoint make_checkpoint(Model& model, const TrainState& state, nlohmann::json metadata);

/// Copies checkpoint parameters into the model (shapes must match) and
/// rebuilds the optimizer state.
void restore_checkpoint(const Checkpoint& ckpt, Model& model, TrainState& state);

}  // namespace papool
