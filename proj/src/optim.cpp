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

#include "papool/optim.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "papool/errors.hpp"

namespace papool {

namespace {

void check_shapes(std::span<Tensor> params, std::span<const std::vector<double>> grads) {
  if (params.size() != grads.size()) {
    throw ContractError("optimizer got " + std::to_string(grads.size()) + " gradients for " +
                        std::to_string(params.size()) + " parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].numel() != grads[i].size()) {
      throw ContractError("gradient " + std::to_string(i) + " has " + std::to_string(grads[i].size()) +
                          " entries for parameter of shape " + shape_to_string(params[i].shape()));
    }
  }
}

void ensure_buffers(std::vector<std::vector<double>>& buffers, std::span<Tensor> params) {
  if (buffers.size() == params.size()) return;
  buffers.clear();
  for (const auto& p : params) buffers.emplace_back(p.numel(), 0.0);
}

}  // namespace

std::string_view to_string(OptimizerKind k) { return k == OptimizerKind::adam ? "adam" : "sgd_momentum"; }
std::string_view to_string(LrSchedule s) { return s == LrSchedule::constant ? "constant" : "cosine"; }

OptimizerKind parse_optimizer_kind(std::string_view s) {
  if (s == "adam") return OptimizerKind::adam;
  if (s == "sgd_momentum" || s == "sgd") return OptimizerKind::sgd_momentum;
  throw ConfigError("unknown optimizer '" + std::string(s) + "'");
}

LrSchedule parse_lr_schedule(std::string_view s) {
  if (s == "constant") return LrSchedule::constant;
  if (s == "cosine") return LrSchedule::cosine;
  throw ConfigError("unknown lr schedule '" + std::string(s) + "'");
}

void OptimizerConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("momentum must lie in [0, 1)");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) throw ConfigError("Adam betas must lie in [0, 1)");
  if (!(eps > 0.0)) throw ConfigError("Adam eps must be positive");
  if (weight_decay < 0.0) throw ConfigError("weight decay must be non-negative");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
}

double learning_rate(const OptimizerConfig& config, std::size_t epoch) {
  if (config.schedule == LrSchedule::constant || config.epochs == 0) return config.lr;
  const double t = static_cast<double>(epoch) / static_cast<double>(config.epochs);
  return 0.5 * config.lr * (1.0 + std::cos(std::numbers::pi * t));
}

void sgd_step(std::span<Tensor> params, std::span<const std::vector<double>> grads, const OptimizerConfig& config,
              OptimizerState& state, double lr) {
  check_shapes(params, grads);
  ensure_buffers(state.first, params);
  ++state.step;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].mutable_data();
    auto& buf = state.first[i];
    const auto& g = grads[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double grad = g[j] + config.weight_decay * p[j];
      buf[j] = config.momentum * buf[j] + grad;
      p[j] -= lr * buf[j];
    }
  }
}

void adam_step(std::span<Tensor> params, std::span<const std::vector<double>> grads, const OptimizerConfig& config,
               OptimizerState& state, double lr) {
  check_shapes(params, grads);
  ensure_buffers(state.first, params);
  ensure_buffers(state.second, params);
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].mutable_data();
    auto& m = state.first[i];
    auto& v = state.second[i];
    const auto& g = grads[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double grad = g[j] + config.weight_decay * p[j];
      m[j] = config.beta1 * m[j] + (1.0 - config.beta1) * grad;
      v[j] = config.beta2 * v[j] + (1.0 - config.beta2) * grad * grad;
      p[j] -= lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + config.eps);
    }
  }
}

void optimizer_step(std::span<Tensor> params, std::span<const std::vector<double>> grads,
                    const OptimizerConfig& config, OptimizerState& state, double lr) {
  if (config.kind == OptimizerKind::adam) {
    adam_step(params, grads, config, state, lr);
  } else {
    sgd_step(params, grads, config, state, lr);
  }
}

void round_to_f32(std::span<Tensor> params, OptimizerState& state) {
  auto round = [](double& v) { v = static_cast<double>(static_cast<float>(v)); };
  for (auto& p : params) {
    for (auto& v : p.mutable_data()) round(v);
  }
  for (auto* buffers : {&state.first, &state.second}) {
    for (auto& b : *buffers) {
      for (auto& v : b) round(v);
    }
  }
}

}  // namespace papool
