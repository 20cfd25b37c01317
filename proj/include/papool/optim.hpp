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
#include <span>
#include <string_view>
#include <vector>

#include "papool/tensor.hpp"

namespace papool {

enum class OptimizerKind { sgd_momentum, adam };
enum class LrSchedule { constant, cosine };

std::string_view to_string(OptimizerKind k);
std::string_view to_string(LrSchedule s);
OptimizerKind parse_optimizer_kind(std::string_view s);
LrSchedule parse_lr_schedule(std::string_view s);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double lr = 1e-3;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
  std::size_t epochs = 30;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  LrSchedule schedule = LrSchedule::constant;

  void validate() const;
};

/// Per-parameter moment buffers, allocated lazily on the first step.
struct OptimizerState {
  std::uint64_t step = 0;
  std::vector<std::vector<double>> first;   // momentum buffer / Adam m
  std::vector<std::vector<double>> second;  // Adam v
};

/// Learning rate for a 0-based epoch under the configured schedule.
double learning_rate(const OptimizerConfig& config, std::size_t epoch);

/// p -= lr * buf, buf = momentum * buf + (g + wd * p).
void sgd_step(std::span<Tensor> params, std::span<const std::vector<double>> grads, const OptimizerConfig& config,
              OptimizerState& state, double lr);

/// Bias-corrected Adam with L2 weight decay folded into the gradient.
void adam_step(std::span<Tensor> params, std::span<const std::vector<double>> grads, const OptimizerConfig& config,
               OptimizerState& state, double lr);

void optimizer_step(std::span<Tensor> params, std::span<const std::vector<double>> grads,
                    const OptimizerConfig& config, OptimizerState& state, double lr);

/// Rounds parameters and optimizer buffers to the nearest f32 value so that
/// an f32 checkpoint captures the training state exactly.
void round_to_f32(std::span<Tensor> params, OptimizerState& state);

}  // namespace papool
