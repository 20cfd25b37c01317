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

#include <filesystem>

#include "papool/config.hpp"
#include "papool/data.hpp"

// A model small enough to train in well under a second per epoch on 32-point clouds.
inline papool::RunConfig small_run_config(std::size_t epochs = 3) {
  papool::RunConfig cfg;
  papool::SetAbstractionConfig a;
  a.centers = 16;
  a.neighbors = 8;
  a.mlp = {16, 32};
  papool::SetAbstractionConfig b;
  b.centers = 4;
  b.neighbors = 4;
  b.mlp = {32, 32};
  cfg.model.stages = {a, b};
  cfg.model.head = {16};
  cfg.model.papool.hidden = {8};
  cfg.optimizer.epochs = epochs;
  cfg.optimizer.batch_size = 4;
  cfg.optimizer.lr = 5e-3;
  cfg.optimizer.seed = 3;
  return cfg;
}

inline papool::GenerateOptions small_generate_options() {
  papool::GenerateOptions g;
  g.train_per_class = 6;
  g.test_per_class = 2;
  g.points = 32;
  g.seed = 1;
  return g;
}
