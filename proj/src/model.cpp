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

#include "papool/model.hpp"

#include "papool/errors.hpp"
#include "papool/ops.hpp"

namespace papool {

namespace {

std::string join(const std::string& prefix, const std::string& name) {
  return prefix.empty() ? name : prefix + "." + name;
}

PAPoolConfig pool_config_for(const ModelConfig& config, std::size_t channels) {
  PAPoolConfig pc = config.papool;
  pc.channels = channels;
  return pc;
}

Tensor pool(PoolingKind kind, const Tensor& center_xyz, const Tensor& neighbor_xyz, const Tensor& features,
            const std::optional<PAPoolParams>& params, const PadMask& mask, LocalGraph* graph) {
  switch (kind) {
    case PoolingKind::max: return max_pool(features, mask);
    case PoolingKind::avg: return avg_pool(features, mask);
    case PoolingKind::papool: return papool(center_xyz, neighbor_xyz, features, *params, mask, graph);
  }
  throw ConfigError("unknown pooling kind");
}

}  // namespace

std::string_view to_string(QueryKind q) { return q == QueryKind::knn ? "knn" : "ball"; }

std::string_view to_string(PoolingKind p) {
  switch (p) {
    case PoolingKind::max: return "max";
    case PoolingKind::avg: return "avg";
    case PoolingKind::papool: return "papool";
  }
  return "?";
}

QueryKind parse_query_kind(std::string_view s) {
  if (s == "knn") return QueryKind::knn;
  if (s == "ball") return QueryKind::ball;
  throw ConfigError("unknown query kind '" + std::string(s) + "'");
}

PoolingKind parse_pooling_kind(std::string_view s) {
  for (auto p : {PoolingKind::max, PoolingKind::avg, PoolingKind::papool}) {
    if (s == to_string(p)) return p;
  }
  throw ConfigError("unknown pooling kind '" + std::string(s) + "'");
}

ModelConfig ModelConfig::defaults() {
  ModelConfig c;
  SetAbstractionConfig first;
  first.centers = 128;
  first.neighbors = 16;
  first.mlp = {32, 64};
  SetAbstractionConfig second;
  second.centers = 32;
  second.neighbors = 16;
  second.mlp = {64, 128};
  c.stages = {first, second};
  return c;
}

void ModelConfig::validate() const {
  if (classes < 1) throw ConfigError("model needs at least one class");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must lie in [0, 1)");
  for (auto w : head) {
    if (w == 0) throw ConfigError("head widths must be >= 1");
  }
  std::size_t width = input_features;
  for (std::size_t s = 0; s < stages.size(); ++s) {
    const auto& st = stages[s];
    if (st.centers < 1 || st.neighbors < 1) throw ConfigError("stage " + std::to_string(s) + ": centers and K must be >= 1");
    if (s > 0 && st.centers > stages[s - 1].centers) {
      throw ConfigError("stage " + std::to_string(s) + " samples more centers than its input has");
    }
    if (st.query == QueryKind::ball && !(st.radius > 0.0)) throw ConfigError("ball query radius must be positive");
    for (auto w : st.mlp) {
      if (w == 0) throw ConfigError("stage " + std::to_string(s) + ": MLP widths must be >= 1");
    }
    const std::size_t in = width + (st.use_xyz ? 3 : 0);
    if (in == 0) throw ConfigError("stage " + std::to_string(s) + " has no input channels");
    width = st.mlp.empty() ? in : st.mlp.back();
  }
}

std::size_t ModelConfig::stage_output_width(std::size_t stage) const {
  std::size_t width = input_features;
  for (std::size_t s = 0; s <= stage && s < stages.size(); ++s) {
    const std::size_t in = width + (stages[s].use_xyz ? 3 : 0);
    width = stages[s].mlp.empty() ? in : stages[s].mlp.back();
  }
  return width;
}

std::size_t SetAbstraction::out_features() const {
  return mlp.empty() ? in_features + (config.use_xyz ? 3 : 0) : mlp.back().out_features();
}

void SetAbstraction::visit(const std::string& prefix, const ParameterVisitor& fn) {
  for (std::size_t l = 0; l < mlp.size(); ++l) mlp[l].visit(join(prefix, "mlp." + std::to_string(l)), fn);
  if (papool) papool->visit(join(prefix, "papool"), fn);
}

SetAbstractionOutput set_abstraction_forward(const PointCloud& cloud, const SetAbstraction& block,
                                             std::size_t k_override, bool keep_graph) {
  const auto& cfg = block.config;
  const auto n = cloud.size();
  const auto k = k_override ? k_override : cfg.neighbors;
  if (cfg.centers > n) {
    throw ValidationError("stage needs " + std::to_string(cfg.centers) + " points, cloud has " + std::to_string(n));
  }
  const std::size_t features_in = cloud.features.defined() ? cloud.features.dim(1) : 0;
  if (features_in != block.in_features) {
    throw ConfigError("stage expects " + std::to_string(block.in_features) + " input features, got " +
                      std::to_string(features_in));
  }

  SetAbstractionOutput out;
  const auto centers = farthest_point_sample(cloud, cfg.centers, 0);
  out.grouping = cfg.query == QueryKind::knn ? knn_grouping(cloud, centers, k)
                                             : ball_query(cloud, centers, cfg.radius, k);
  const auto& g = out.grouping;
  const auto regions = g.num_centers();

  const Tensor center_xyz = index_select(cloud.points, centers, {regions});
  const Tensor neighbor_xyz = group(cloud.points, g);

  std::vector<Tensor> parts;
  if (cfg.use_xyz) {
    auto c = center_xyz.data();
    std::vector<double> offsets = neighbor_xyz.to_vector();
    for (std::size_t r = 0; r < regions; ++r) {
      for (std::size_t j = 0; j < k; ++j) {
        for (std::size_t a = 0; a < 3; ++a) offsets[(r * k + j) * 3 + a] -= c[3 * r + a];
      }
    }
    parts.push_back(Tensor::from({regions, k, 3}, std::move(offsets)));
  }
  if (cloud.features.defined()) parts.push_back(group(cloud.features, g));
  if (parts.empty()) throw ConfigError("stage has neither xyz offsets nor features as input");

  Tensor h = parts.size() == 1 ? parts.front() : concat(parts, 2);
  for (const auto& layer : block.mlp) h = relu(layer(h));

  Tensor pooled = pool(block.pooling, center_xyz, neighbor_xyz, h, block.papool, g.pad_mask,
                       keep_graph ? &out.graph : nullptr);
  out.cloud = PointCloud{center_xyz.detach(), pooled};
  return out;
}

Tensor global_pool(const PointCloud& cloud, PoolingKind pooling, const std::optional<PAPoolParams>& params) {
  const auto n = cloud.size();
  const auto c = cloud.features.dim(1);
  auto xyz = cloud.points.data();
  std::vector<double> centroid(3, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t a = 0; a < 3; ++a) centroid[a] += xyz[3 * i + a];
  }
  for (auto& v : centroid) v /= static_cast<double>(n);
  const Tensor center = Tensor::from({1, 3}, std::move(centroid));
  const Tensor neighbors = Tensor::from({1, n, 3}, cloud.points.to_vector());
  const Tensor features = reshape(cloud.features, {1, n, c});
  return pool(pooling, center, neighbors, features, params, {}, nullptr);
}

Model Model::create(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Model m;
  m.config_ = config;
  Rng rng(derive_seed(seed, "init"));
  std::size_t width = config.input_features;
  for (const auto& st : config.stages) {
    SetAbstraction block;
    block.config = st;
    block.pooling = config.pooling;
    block.in_features = width;
    std::size_t in = width + (st.use_xyz ? 3 : 0);
    for (auto w : st.mlp) {
      block.mlp.push_back(LinearLayer::init(in, w, rng));
      in = w;
    }
    if (config.pooling == PoolingKind::papool) block.papool = PAPoolParams::init(pool_config_for(config, in), rng);
    width = in;
    m.stages_.push_back(std::move(block));
  }
  if (config.pooling == PoolingKind::papool) m.global_papool_ = PAPoolParams::init(pool_config_for(config, width), rng);
  std::size_t in = width;
  for (auto w : config.head) {
    m.head_.push_back(LinearLayer::init(in, w, rng));
    in = w;
  }
  m.head_.push_back(LinearLayer::init(in, config.classes, rng));
  return m;
}

Tensor Model::forward(const PointCloud& cloud, const ForwardOptions& options) const {
  cloud.validate();
  const std::size_t needed = stages_.empty() ? 1 : stages_.front().config.centers;
  if (cloud.size() < needed) {
    throw ValidationError("cloud has " + std::to_string(cloud.size()) + " points, model needs at least " +
                          std::to_string(needed));
  }
  PointCloud current = cloud;
  if (!current.features.defined() && stages_.empty()) {
    throw ConfigError("model without stages needs per-point input features");
  }
  for (const auto& block : stages_) current = set_abstraction_forward(current, block).cloud;

  Tensor h = global_pool(current, config_.pooling, global_papool_);
  for (std::size_t l = 0; l < head_.size(); ++l) {
    h = head_[l](h);
    if (l + 1 < head_.size()) {
      h = relu(h);
      if (options.training && config_.dropout > 0.0) {
        if (!options.dropout_rng) throw ContractError("training forward needs a dropout RNG");
        h = dropout(h, config_.dropout, *options.dropout_rng);
      }
    }
  }
  return h;
}

void Model::visit(const std::string& prefix, const ParameterVisitor& fn) {
  for (std::size_t s = 0; s < stages_.size(); ++s) stages_[s].visit(join(prefix, "sa" + std::to_string(s)), fn);
  if (global_papool_) global_papool_->visit(join(prefix, "global.papool"), fn);
  for (std::size_t l = 0; l < head_.size(); ++l) head_[l].visit(join(prefix, "head." + std::to_string(l)), fn);
}

std::vector<std::pair<std::string, Tensor>> Model::named_parameters() {
  std::vector<std::pair<std::string, Tensor>> out;
  visit("", [&out](const std::string& name, Tensor& t) { out.emplace_back(name, t); });
  return out;
}

Model Model::replica() const {
  Model copy = *this;
  copy.visit("", [](const std::string&, Tensor& t) { t = t.alias_leaf(true); });
  return copy;
}

Tensor classifier_forward(const Model& model, std::span<const PointCloud> clouds, const ForwardOptions& options) {
  if (clouds.empty()) throw ValidationError("empty batch");
  std::vector<Tensor> logits;
  logits.reserve(clouds.size());
  for (const auto& c : clouds) logits.push_back(model.forward(c, options));
  return logits.size() == 1 ? logits.front() : concat(logits, 0);
}

LocalGraph inspect_graph(const Model& model, const PointCloud& cloud, std::size_t stage, std::size_t k_override) {
  if (model.config().pooling != PoolingKind::papool) throw ConfigError("weight inspection needs papool pooling");
  const auto& stages = model.stages();
  if (stage >= stages.size()) {
    throw ValidationError("stage " + std::to_string(stage) + " out of range for " + std::to_string(stages.size()) +
                          " stages");
  }
  NoGradGuard no_grad;
  cloud.validate();
  PointCloud current = cloud;
  for (std::size_t s = 0; s < stage; ++s) current = set_abstraction_forward(current, stages[s]).cloud;
  if (k_override > current.size()) {
    throw ValidationError("K = " + std::to_string(k_override) + " exceeds the " + std::to_string(current.size()) +
                          " points available at stage " + std::to_string(stage));
  }
  return set_abstraction_forward(current, stages[stage], k_override, true).graph;
}

}  // namespace papool
