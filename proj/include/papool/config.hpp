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

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "papool/data.hpp"
#include "papool/model.hpp"
#include "papool/optim.hpp"

namespace papool {

inline constexpr std::string_view kToolVersion = "papool 1.0.0";

struct DataConfig {
  std::string dir;
  bool augment = false;
  AugmentOptions augment_options;
};

/// Everything a run depends on. Serialized as one JSON document; the seed
/// lives in optimizer.seed and is exposed top-level as "seed".
struct RunConfig {
  ModelConfig model = ModelConfig::defaults();
  OptimizerConfig optimizer;
  DataConfig data;

  void validate() const;
};

nlohmann::json to_json(const RunConfig& config);
/// Missing keys keep their defaults; unknown keys throw ConfigError.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

/// 16 hex digits of FNV-1a over the canonical JSON dump.
std::string digest_of(const nlohmann::json& j);
std::string config_digest(const RunConfig& config);

}  // namespace papool
