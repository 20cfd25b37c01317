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
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "papool/geometry.hpp"
#include "papool/layers.hpp"
#include "papool/rng.hpp"
#include "papool/tensor.hpp"

namespace papool {

/// Normalization applied to encoder logits along the neighbor axis.
enum class Normalization { softmax, logsoftmax, sigmoid, tanh, none };
/// One weight per (neighbor, channel) or one per neighbor shared by all channels.
enum class WeightMode { channel_wise, channel_agnostic };
/// Output activation of the aggregation.
enum class Activation { identity, relu };

std::string_view to_string(Normalization n);
std::string_view to_string(WeightMode m);
std::string_view to_string(Activation a);
Normalization parse_normalization(std::string_view s);
WeightMode parse_weight_mode(std::string_view s);
Activation parse_activation(std::string_view s);

/// Shape and behavior of a position-adaptive pooling operator.
struct PAPoolConfig {
  std::size_t channels = 0;                // C, width of the pooled features
  std::vector<std::size_t> hidden{32};     // encoder hidden widths; depth = hidden.size() + 1
  Normalization normalization = Normalization::softmax;
  WeightMode weight_mode = WeightMode::channel_wise;
  std::size_t orders = 1;                  // M
  bool per_channel_order_weights = false;  // w as [M, C] instead of [M]
  Activation activation = Activation::identity;

  std::size_t encoder_depth() const { return hidden.size() + 1; }
  std::size_t weight_width() const { return weight_mode == WeightMode::channel_wise ? channels : 1; }
};

/// Learnable state: the relative-position encoder stack and the order weights.
struct PAPoolParams {
  PAPoolConfig config;
  std::vector<LinearLayer> encoder;
  Tensor order_weights;  // [M] or [M, C], initialized to 1

  static PAPoolParams init(const PAPoolConfig& config, Rng& rng);

  /// Throws ConfigError if the encoder widths do not chain 4 -> ... -> C (or 1).
  void validate() const;
  void visit(const std::string& prefix, const ParameterVisitor& fn);
};

/// Per-region neighbor weights produced by the encoder.
struct LocalGraph {
  Tensor weights;       // [N_p, K, C] channel-wise or [N_p, K, 1] channel-agnostic
  PadMask pad_mask;     // N_p x K, empty when there are no pads
  std::size_t channels = 0;

  std::size_t regions() const { return weights.dim(0); }
  std::size_t neighbors() const { return weights.dim(1); }
  /// Weight of (region, slot) as seen by feature channel `channel`.
  double weight(std::size_t region, std::size_t slot, std::size_t channel) const;
};

/// Encodes relative positions [N_p, K, 4] into normalized neighbor weights.
/// Hidden layers use ReLU; pad slots end up with weight exactly 0.
LocalGraph construct_graph(const Tensor& relpos, const PAPoolParams& params, const PadMask& pad_mask = {});

/// out[r, c] = act( sum_m w_m[c] * sum_j E[r, j, c] X[r, j, c] ).
Tensor aggregate(const LocalGraph& graph, const Tensor& features, const PAPoolParams& params);

/// Relative positions -> graph -> aggregation. Optionally hands back the graph.
Tensor papool(const Tensor& centers_xyz, const Tensor& neighbors_xyz, const Tensor& features,
              const PAPoolParams& params, const PadMask& pad_mask = {}, LocalGraph* graph_out = nullptr);

/// Per-channel maximum over non-pad neighbors; [N_p, K, C] -> [N_p, C].
Tensor max_pool(const Tensor& features, const PadMask& pad_mask = {});

/// Per-channel mean over non-pad neighbors; [N_p, K, C] -> [N_p, C].
Tensor avg_pool(const Tensor& features, const PadMask& pad_mask = {});

struct WeightRecord {
  std::size_t region;
  std::size_t slot;
  std::size_t channel;
  double weight;
  bool is_pad;
};

/// One record per (slot, channel) of a region, slot-major.
std::vector<WeightRecord> dump_weights(const LocalGraph& graph, std::size_t region,
                                       std::span<const std::size_t> channels);

/// CSV with header `region,slot,channel,weight,is_pad`; weights at 9 significant digits.
void write_weights_csv(std::ostream& os, std::span<const WeightRecord> records);

}  // namespace papool
