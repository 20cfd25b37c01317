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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "papool/geometry.hpp"
#include "papool/layers.hpp"
#include "papool/pooling.hpp"
#include "papool/rng.hpp"
#include "papool/tensor.hpp"

namespace papool {

enum class QueryKind { knn, ball };
enum class PoolingKind { max, avg, papool };

std::string_view to_string(QueryKind q);
std::string_view to_string(PoolingKind p);
QueryKind parse_query_kind(std::string_view s);
PoolingKind parse_pooling_kind(std::string_view s);

struct SetAbstractionConfig {
  std::size_t centers = 128;
  std::size_t neighbors = 16;
  QueryKind query = QueryKind::knn;
  double radius = 0.2;
  std::vector<std::size_t> mlp{32, 64};
  bool use_xyz = true;  // feed (neighbor - center) offsets to the MLP
};

struct ModelConfig {
  std::vector<SetAbstractionConfig> stages;
  std::vector<std::size_t> head{64};  // hidden widths of the classifier head
  std::size_t classes = 4;
  double dropout = 0.4;
  std::size_t input_features = 0;  // per-point features carried by input clouds
  PoolingKind pooling = PoolingKind::papool;
  PAPoolConfig papool;  // channels are filled in per stage

  /// Two stages (128 -> 32 centers, K = 16, MLPs [32, 64] and [64, 128]), head [64].
  static ModelConfig defaults();
  /// Throws ConfigError on zero widths, K = 0 or a bad dropout rate.
  void validate() const;
  /// Width of the features leaving stage `stage`.
  std::size_t stage_output_width(std::size_t stage) const;
};

/// One sample -> group -> shared MLP -> pool block.
struct SetAbstraction {
  SetAbstractionConfig config;
  PoolingKind pooling = PoolingKind::max;
  std::size_t in_features = 0;
  std::vector<LinearLayer> mlp;
  std::optional<PAPoolParams> papool;

  std::size_t out_features() const;
  void visit(const std::string& prefix, const ParameterVisitor& fn);
};

struct SetAbstractionOutput {
  PointCloud cloud;  // sampled centers with their pooled features
  Grouping grouping;
  LocalGraph graph;  // only filled for papool pooling with keep_graph
};

/// Runs one set-abstraction block. `k_override` replaces the configured
/// neighbor count when nonzero; `keep_graph` fills SetAbstractionOutput::graph
/// (both used for weight inspection).
SetAbstractionOutput set_abstraction_forward(const PointCloud& cloud, const SetAbstraction& block,
                                             std::size_t k_override = 0, bool keep_graph = false);

/// Pools a [N_p, C] feature set into one region around the centroid of its points.
Tensor global_pool(const PointCloud& cloud, PoolingKind pooling, const std::optional<PAPoolParams>& params);

struct ForwardOptions {
  bool training = false;
  Rng* dropout_rng = nullptr;  // required when training with dropout > 0
};

/// Hierarchical point classifier with a pluggable pooling operator.
class Model {
 public:
  static Model create(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const std::vector<SetAbstraction>& stages() const { return stages_; }

  /// Logits [1, classes] for one cloud.
  Tensor forward(const PointCloud& cloud, const ForwardOptions& options = {}) const;

  void visit(const std::string& prefix, const ParameterVisitor& fn);
  std::vector<std::pair<std::string, Tensor>> named_parameters();

  /// Copy sharing parameter storage, with private gradient buffers.
  Model replica() const;

 private:
  ModelConfig config_;
  std::vector<SetAbstraction> stages_;
  std::optional<PAPoolParams> global_papool_;
  std::vector<LinearLayer> head_;
};

/// Logits [B, classes] for a batch of clouds.
Tensor classifier_forward(const Model& model, std::span<const PointCloud> clouds, const ForwardOptions& options = {});

/// Local graph built at `stage` for a cloud, with an optional K override.
/// Throws ConfigError unless the model pools with papool.
LocalGraph inspect_graph(const Model& model, const PointCloud& cloud, std::size_t stage, std::size_t k_override = 0);

template <typename Module>
std::size_t count_parameters(Module& module) {
  std::size_t total = 0;
  module.visit("", [&total](const std::string&, Tensor& t) { total += t.numel(); });
  return total;
}

inline std::size_t count_parameters(std::span<LinearLayer> layers) {
  std::size_t total = 0;
  for (auto& l : layers) total += count_parameters(l);
  return total;
}

}  // namespace papool
