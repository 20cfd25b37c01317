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

#include "papool/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <initializer_list>

#include "papool/errors.hpp"
#include "papool/rng.hpp"

namespace papool {

using json = nlohmann::json;

namespace {

void reject_unknown(const json& j, std::string_view where, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw ConfigError(std::string(where) + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError("unknown key '" + key + "' in " + std::string(where));
    }
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

std::string read_string(const json& j, const char* key, std::string_view fallback) {
  std::string s(fallback);
  read(j, key, s);
  return s;
}

json stage_to_json(const SetAbstractionConfig& s) {
  return {{"centers", s.centers}, {"neighbors", s.neighbors}, {"query", to_string(s.query)},
          {"radius", s.radius},   {"mlp", s.mlp},             {"use_xyz", s.use_xyz}};
}

SetAbstractionConfig stage_from_json(const json& j) {
  reject_unknown(j, "model.stages[]", {"centers", "neighbors", "query", "radius", "mlp", "use_xyz"});
  SetAbstractionConfig s;
  read(j, "centers", s.centers);
  read(j, "neighbors", s.neighbors);
  s.query = parse_query_kind(read_string(j, "query", to_string(s.query)));
  read(j, "radius", s.radius);
  read(j, "mlp", s.mlp);
  read(j, "use_xyz", s.use_xyz);
  return s;
}

}  // namespace

void RunConfig::validate() const {
  model.validate();
  optimizer.validate();
  if (model.papool.orders < 1) throw ConfigError("papool.orders must be >= 1");
  for (auto w : model.papool.hidden) {
    if (w == 0) throw ConfigError("papool hidden widths must be >= 1");
  }
}

json to_json(const RunConfig& c) {
  json stages = json::array();
  for (const auto& s : c.model.stages) stages.push_back(stage_to_json(s));
  const auto& p = c.model.papool;
  const auto& o = c.optimizer;
  const auto& a = c.data.augment_options;
  return {
      {"version", 1},
      {"seed", o.seed},
      {"data",
       {{"dir", c.data.dir},
        {"augment", c.data.augment},
        {"rotate_z", a.rotate_z},
        {"jitter_sigma", a.jitter_sigma},
        {"scale_min", a.scale_min},
        {"scale_max", a.scale_max}}},
      {"model",
       {{"stages", stages},
        {"head", c.model.head},
        {"classes", c.model.classes},
        {"dropout", c.model.dropout},
        {"input_features", c.model.input_features},
        {"pooling", to_string(c.model.pooling)}}},
      {"papool",
       {{"hidden", p.hidden},
        {"normalization", to_string(p.normalization)},
        {"normalization_axis", "neighbors"},
        {"weights", to_string(p.weight_mode)},
        {"orders", p.orders},
        {"per_channel_order_weights", p.per_channel_order_weights},
        {"activation", to_string(p.activation)}}},
      {"optimizer",
       {{"kind", to_string(o.kind)},
        {"lr", o.lr},
        {"momentum", o.momentum},
        {"beta1", o.beta1},
        {"beta2", o.beta2},
        {"eps", o.eps},
        {"weight_decay", o.weight_decay},
        {"epochs", o.epochs},
        {"batch_size", o.batch_size},
        {"schedule", to_string(o.schedule)}}},
  };
}

RunConfig run_config_from_json(const json& j) {
  reject_unknown(j, "config", {"version", "seed", "data", "model", "papool", "optimizer"});
  RunConfig c;
  int version = 1;
  read(j, "version", version);
  if (version != 1) throw ConfigError("unsupported config version " + std::to_string(version));
  read(j, "seed", c.optimizer.seed);

  if (j.contains("data")) {
    const auto& d = j.at("data");
    reject_unknown(d, "data", {"dir", "augment", "rotate_z", "jitter_sigma", "scale_min", "scale_max"});
    read(d, "dir", c.data.dir);
    read(d, "augment", c.data.augment);
    read(d, "rotate_z", c.data.augment_options.rotate_z);
    read(d, "jitter_sigma", c.data.augment_options.jitter_sigma);
    read(d, "scale_min", c.data.augment_options.scale_min);
    read(d, "scale_max", c.data.augment_options.scale_max);
  }
  if (j.contains("model")) {
    const auto& m = j.at("model");
    reject_unknown(m, "model", {"stages", "head", "classes", "dropout", "input_features", "pooling"});
    if (m.contains("stages")) {
      c.model.stages.clear();
      for (const auto& s : m.at("stages")) c.model.stages.push_back(stage_from_json(s));
    }
    read(m, "head", c.model.head);
    read(m, "classes", c.model.classes);
    read(m, "dropout", c.model.dropout);
    read(m, "input_features", c.model.input_features);
    c.model.pooling = parse_pooling_kind(read_string(m, "pooling", to_string(c.model.pooling)));
  }
  if (j.contains("papool")) {
    const auto& p = j.at("papool");
    reject_unknown(p, "papool",
                   {"hidden", "normalization", "normalization_axis", "weights", "orders", "per_channel_order_weights",
                    "activation"});
    auto& pc = c.model.papool;
    read(p, "hidden", pc.hidden);
    pc.normalization = parse_normalization(read_string(p, "normalization", to_string(pc.normalization)));
    if (read_string(p, "normalization_axis", "neighbors") != "neighbors") {
      throw ConfigError("papool.normalization_axis supports only \"neighbors\"");
    }
    pc.weight_mode = parse_weight_mode(read_string(p, "weights", to_string(pc.weight_mode)));
    read(p, "orders", pc.orders);
    read(p, "per_channel_order_weights", pc.per_channel_order_weights);
    pc.activation = parse_activation(read_string(p, "activation", to_string(pc.activation)));
  }
  if (j.contains("optimizer")) {
    const auto& o = j.at("optimizer");
    reject_unknown(o, "optimizer",
                   {"kind", "lr", "momentum", "beta1", "beta2", "eps", "weight_decay", "epochs", "batch_size", "schedule"});
    auto& oc = c.optimizer;
    oc.kind = parse_optimizer_kind(read_string(o, "kind", to_string(oc.kind)));
    read(o, "lr", oc.lr);
    read(o, "momentum", oc.momentum);
    read(o, "beta1", oc.beta1);
    read(o, "beta2", oc.beta2);
    read(o, "eps", oc.eps);
    read(o, "weight_decay", oc.weight_decay);
    read(o, "epochs", oc.epochs);
    read(o, "batch_size", oc.batch_size);
    oc.schedule = parse_lr_schedule(read_string(o, "schedule", to_string(oc.schedule)));
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot open config '" + path.string() + "'");
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return run_config_from_json(j);
}

std::string digest_of(const json& j) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(j.dump())));
  return buf;
}

std::string config_digest(const RunConfig& config) { return digest_of(to_json(config)); }

}  // namespace papool
