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

#include "papool/pooling.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <ostream>

#include <Eigen/Dense>

#include "papool/errors.hpp"
#include "papool/ops.hpp"

namespace papool {

namespace {

bool any_pad(const PadMask& mask) {
  return std::any_of(mask.begin(), mask.end(), [](std::uint8_t m) { return m != 0; });
}

void check_mask(const PadMask& mask, std::size_t regions, std::size_t k) {
  if (!mask.empty() && mask.size() != regions * k) {
    throw DimensionError("pad mask has " + std::to_string(mask.size()) + " entries, expected " +
                         std::to_string(regions * k));
  }
}

void check_neighbor_features(const Tensor& features) {
  if (features.rank() != 3) {
    throw DimensionError("expected neighbor features [N_p, K, C], got " + shape_to_string(features.shape()));
  }
}

// S[r, c] = sum_j E[r, j, c or 0] * X[r, j, c]
Tensor weighted_neighbor_sum(const Tensor& weights, const Tensor& features) {
  const auto regions = features.dim(0);
  const auto k = features.dim(1);
  const auto c = features.dim(2);
  const auto cw = weights.dim(2);
  auto e = weights.data();
  auto x = features.data();
  Buffer out(regions * c, 0.0);
  for (std::size_t r = 0; r < regions; ++r) {
    double* dst = out.data() + r * c;
    for (std::size_t j = 0; j < k; ++j) {
      const double* xr = x.data() + (r * k + j) * c;
      const double* er = e.data() + (r * k + j) * cw;
      if (cw == 1) {
        const double w = er[0];
        for (std::size_t ch = 0; ch < c; ++ch) dst[ch] += w * xr[ch];
      } else {
        for (std::size_t ch = 0; ch < c; ++ch) dst[ch] += er[ch] * xr[ch];
      }
    }
  }
  return Tensor::make_op(
      "weighted_neighbor_sum", {regions, c}, std::move(out), {weights, features},
      [weights, features, regions, k, c, cw](const BackwardContext& ctx) {
        auto g = ctx.out_grad;
        if (weights.requires_grad()) {
          auto de = weights.grad_buffer();
          auto x = features.data();
          for (std::size_t r = 0; r < regions; ++r) {
            for (std::size_t j = 0; j < k; ++j) {
              const double* xr = x.data() + (r * k + j) * c;
              double* der = de.data() + (r * k + j) * cw;
              if (cw == 1) {
                double acc = 0.0;
                for (std::size_t ch = 0; ch < c; ++ch) acc += g[r * c + ch] * xr[ch];
                der[0] += acc;
              } else {
                for (std::size_t ch = 0; ch < c; ++ch) der[ch] += g[r * c + ch] * xr[ch];
              }
            }
          }
        }
        if (features.requires_grad()) {
          auto dx = features.grad_buffer();
          auto e = weights.data();
          for (std::size_t r = 0; r < regions; ++r) {
            for (std::size_t j = 0; j < k; ++j) {
              const double* er = e.data() + (r * k + j) * cw;
              double* dxr = dx.data() + (r * k + j) * c;
              for (std::size_t ch = 0; ch < c; ++ch) dxr[ch] += g[r * c + ch] * er[cw == 1 ? 0 : ch];
            }
          }
        }
      });
}

// out[r, c] = (sum_m w[m, c]) * S[r, c]; w is [M] (shared by channels) or [M, C].
Tensor combine_orders(const Tensor& summed, const Tensor& order_weights) {
  const auto regions = summed.dim(0);
  const auto c = summed.dim(1);
  const auto orders = order_weights.dim(0);
  const bool per_channel = order_weights.rank() == 2;
  if (per_channel && order_weights.dim(1) != c) {
    throw DimensionError("order weights " + shape_to_string(order_weights.shape()) + " for " +
                         std::to_string(c) + " channels");
  }
  auto w = order_weights.data();
  std::vector<double> factor(c, 0.0);
  for (std::size_t m = 0; m < orders; ++m) {
    for (std::size_t ch = 0; ch < c; ++ch) factor[ch] += per_channel ? w[m * c + ch] : w[m];
  }
  auto s = summed.data();
  Buffer out(s.size());
  for (std::size_t r = 0; r < regions; ++r) {
    for (std::size_t ch = 0; ch < c; ++ch) out[r * c + ch] = factor[ch] * s[r * c + ch];
  }
  return Tensor::make_op(
      "combine_orders", {regions, c}, std::move(out), {summed, order_weights},
      [summed, order_weights, factor = std::move(factor), regions, c, orders, per_channel](
          const BackwardContext& ctx) {
        auto g = ctx.out_grad;
        if (summed.requires_grad()) {
          auto ds = summed.grad_buffer();
          for (std::size_t r = 0; r < regions; ++r) {
            for (std::size_t ch = 0; ch < c; ++ch) ds[r * c + ch] += g[r * c + ch] * factor[ch];
          }
        }
        if (order_weights.requires_grad()) {
          auto s = summed.data();
          std::vector<double> per(c, 0.0);
          for (std::size_t r = 0; r < regions; ++r) {
            for (std::size_t ch = 0; ch < c; ++ch) per[ch] += g[r * c + ch] * s[r * c + ch];
          }
          auto dw = order_weights.grad_buffer();
          for (std::size_t m = 0; m < orders; ++m) {
            for (std::size_t ch = 0; ch < c; ++ch) dw[per_channel ? m * c + ch : m] += per[ch];
          }
        }
      });
}

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstRowMap = Eigen::Map<const RowMatrix>;

// Forward-only papool: runs the encoder on chunks of regions and fuses the
// normalization with the weighted neighbor sum. Records nothing on the tape.
Tensor papool_forward_only(const Tensor& centers_xyz, const Tensor& neighbors_xyz, const Tensor& features,
                           const PAPoolParams& params, const PadMask& pad_mask) {
  const auto regions = features.dim(0);
  const auto k = features.dim(1);
  const auto c = features.dim(2);
  const auto cw = params.config.weight_width();
  const bool pads = any_pad(pad_mask);
  const auto norm = params.config.normalization;
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();

  std::vector<double> factor(c, 0.0);
  {
    auto w = params.order_weights.data();
    const bool per_channel = params.order_weights.rank() == 2;
    for (std::size_t m = 0; m < params.order_weights.dim(0); ++m) {
      for (std::size_t ch = 0; ch < c; ++ch) factor[ch] += per_channel ? w[m * c + ch] : w[m];
    }
  }

  auto cxyz = centers_xyz.data();
  auto nxyz = neighbors_xyz.data();
  auto x = features.data();
  Buffer out(regions * c);

  const std::size_t chunk = std::max<std::size_t>(1, 256 / std::max<std::size_t>(k, 1));
  RowMatrix h;
  RowMatrix next;
  Eigen::RowVectorXd top(cw);
  Eigen::RowVectorXd total(cw);
  Eigen::RowVectorXd row(cw);
  for (std::size_t r0 = 0; r0 < regions; r0 += chunk) {
    const auto nr = std::min(chunk, regions - r0);
    const auto rows = nr * k;
    h.resize(static_cast<Eigen::Index>(rows), 4);
    for (std::size_t r = 0; r < nr; ++r) {
      const double* ctr = cxyz.data() + 3 * (r0 + r);
      for (std::size_t j = 0; j < k; ++j) {
        const double* nb = nxyz.data() + ((r0 + r) * k + j) * 3;
        const auto row = static_cast<Eigen::Index>(r * k + j);
        const double dx = ctr[0] - nb[0];
        const double dy = ctr[1] - nb[1];
        const double dz = ctr[2] - nb[2];
        h(row, 0) = dx;
        h(row, 1) = dy;
        h(row, 2) = dz;
        h(row, 3) = std::sqrt(dx * dx + dy * dy + dz * dz);
      }
    }
    for (std::size_t l = 0; l < params.encoder.size(); ++l) {
      const auto& layer = params.encoder[l];
      ConstRowMap w(layer.weight.data().data(), layer.in_features(), layer.out_features());
      Eigen::Map<const Eigen::RowVectorXd> b(layer.bias.data().data(), layer.out_features());
      next.resize(h.rows(), w.cols());
      if (l == 0) {
        next.rowwise() = b;
        for (Eigen::Index i = 0; i < 4; ++i) next.noalias() += h.col(i) * w.row(i);
      } else {
        next.noalias() = h * w;
        next.rowwise() += b;
      }
      if (l + 1 < params.encoder.size()) next = next.cwiseMax(0.0);
      h.swap(next);
    }

    for (std::size_t r = 0; r < nr; ++r) {
      const auto region = r0 + r;
      auto e = h.middleRows(static_cast<Eigen::Index>(r * k), static_cast<Eigen::Index>(k));
      const std::uint8_t* mask = pads ? pad_mask.data() + region * k : nullptr;
      ConstRowMap xr(x.data() + region * k * c, k, c);
      Eigen::Map<Eigen::RowVectorXd> dst(out.data() + region * c, c);
      if (norm == Normalization::softmax) {
        // Unnormalized exponentials feed numerator and denominator in one pass.
        if (mask) {
          for (std::size_t j = 0; j < k; ++j) {
            if (mask[j]) e.row(static_cast<Eigen::Index>(j)).setConstant(kNegInf);
          }
        }
        top = e.colwise().maxCoeff();
        dst.setZero();
        total.setZero();
        for (std::size_t j = 0; j < k; ++j) {
          const auto jj = static_cast<Eigen::Index>(j);
          if (mask && mask[j]) continue;
          row = (e.row(jj) - top).array().exp();
          total += row;
          if (cw == 1) {
            dst += row[0] * xr.row(jj);
          } else {
            dst += row.cwiseProduct(xr.row(jj));
          }
        }
        if (cw == 1) {
          dst /= total[0];
        } else {
          dst.array() /= total.array();
        }
      } else {
        switch (norm) {
          case Normalization::logsoftmax:
            if (mask) {
              for (std::size_t j = 0; j < k; ++j) {
                if (mask[j]) e.row(static_cast<Eigen::Index>(j)).setConstant(kNegInf);
              }
            }
            top = e.colwise().maxCoeff();
            e.rowwise() -= top;
            total = e.array().exp().matrix().colwise().sum();
            e.rowwise() -= total.array().log().matrix();
            break;
          case Normalization::sigmoid:
            e = (1.0 + (-e.array()).exp()).inverse();
            break;
          case Normalization::tanh:
            e = e.array().tanh();
            break;
          default:
            break;
        }
        if (mask) {
          for (std::size_t j = 0; j < k; ++j) {
            if (mask[j]) e.row(static_cast<Eigen::Index>(j)).setZero();
          }
        }
        if (cw == 1) {
          dst.noalias() = e.col(0).transpose() * xr;
        } else {
          dst = e.cwiseProduct(xr).colwise().sum();
        }
      }
      for (std::size_t ch = 0; ch < c; ++ch) {
        double v = factor[ch] * dst[ch];
        if (params.config.activation == Activation::relu) v = std::max(v, 0.0);
        dst[ch] = v;
      }
    }
  }
  return Tensor::make_op("papool", {regions, c}, std::move(out), {}, nullptr);
}

}  // namespace

std::string_view to_string(Normalization n) {
  switch (n) {
    case Normalization::softmax: return "softmax";
    case Normalization::logsoftmax: return "logsoftmax";
    case Normalization::sigmoid: return "sigmoid";
    case Normalization::tanh: return "tanh";
    case Normalization::none: return "none";
  }
  return "?";
}

std::string_view to_string(WeightMode m) {
  return m == WeightMode::channel_wise ? "channel_wise" : "channel_agnostic";
}

std::string_view to_string(Activation a) { return a == Activation::identity ? "identity" : "relu"; }

Normalization parse_normalization(std::string_view s) {
  for (auto n : {Normalization::softmax, Normalization::logsoftmax, Normalization::sigmoid, Normalization::tanh,
                 Normalization::none}) {
    if (s == to_string(n)) return n;
  }
  throw ConfigError("unknown normalization '" + std::string(s) + "'");
}

WeightMode parse_weight_mode(std::string_view s) {
  for (auto m : {WeightMode::channel_wise, WeightMode::channel_agnostic}) {
    if (s == to_string(m)) return m;
  }
  throw ConfigError("unknown weight mode '" + std::string(s) + "'");
}

Activation parse_activation(std::string_view s) {
  for (auto a : {Activation::identity, Activation::relu}) {
    if (s == to_string(a)) return a;
  }
  throw ConfigError("unknown activation '" + std::string(s) + "'");
}

PAPoolParams PAPoolParams::init(const PAPoolConfig& config, Rng& rng) {
  if (config.channels == 0) throw ConfigError("papool needs at least one channel");
  if (config.orders == 0) throw ConfigError("papool needs at least one order (M >= 1)");
  PAPoolParams p;
  p.config = config;
  std::size_t in = 4;
  for (auto width : config.hidden) {
    if (width == 0) throw ConfigError("encoder hidden width must be >= 1");
    p.encoder.push_back(LinearLayer::init(in, width, rng));
    in = width;
  }
  p.encoder.push_back(LinearLayer::init(in, config.weight_width(), rng));
  if (config.per_channel_order_weights) {
    p.order_weights = Tensor::full({config.orders, config.channels}, 1.0, true);
  } else {
    p.order_weights = Tensor::full({config.orders}, 1.0, true);
  }
  return p;
}

void PAPoolParams::validate() const {
  if (encoder.empty()) throw ConfigError("papool encoder needs at least one layer");
  std::size_t in = 4;
  for (std::size_t l = 0; l < encoder.size(); ++l) {
    const auto& layer = encoder[l];
    if (layer.weight.rank() != 2 || layer.in_features() != in || layer.bias.rank() != 1 ||
        layer.bias.dim(0) != layer.out_features()) {
      throw ConfigError("encoder layer " + std::to_string(l) + " has weight " +
                        shape_to_string(layer.weight.shape()) + ", expected input width " + std::to_string(in));
    }
    in = layer.out_features();
  }
  if (in != config.weight_width()) {
    throw ConfigError("encoder output width " + std::to_string(in) + " but " +
                      std::string(to_string(config.weight_mode)) + " mode needs " +
                      std::to_string(config.weight_width()));
  }
  if (!order_weights.defined() || order_weights.dim(0) < 1) throw ConfigError("order weights missing");
}

void PAPoolParams::visit(const std::string& prefix, const ParameterVisitor& fn) {
  for (std::size_t l = 0; l < encoder.size(); ++l) encoder[l].visit(prefix + ".encoder." + std::to_string(l), fn);
  fn(prefix + ".order_weights", order_weights);
}

double LocalGraph::weight(std::size_t region, std::size_t slot, std::size_t channel) const {
  const auto cw = weights.dim(2);
  return weights.data()[(region * neighbors() + slot) * cw + (cw == 1 ? 0 : channel)];
}

LocalGraph construct_graph(const Tensor& relpos, const PAPoolParams& params, const PadMask& pad_mask) {
  if (relpos.rank() != 3 || relpos.dim(2) != 4) {
    throw DimensionError("relative positions must be [N_p, K, 4], got " + shape_to_string(relpos.shape()));
  }
  params.validate();
  check_mask(pad_mask, relpos.dim(0), relpos.dim(1));

  Tensor h = relpos;
  for (std::size_t l = 0; l < params.encoder.size(); ++l) {
    h = params.encoder[l](h);
    if (l + 1 < params.encoder.size()) h = relu(h);
  }

  const bool pads = any_pad(pad_mask);
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  switch (params.config.normalization) {
    case Normalization::softmax:
      if (pads) h = masked_fill(h, pad_mask, kNegInf);
      h = softmax(h, 1);
      break;
    case Normalization::logsoftmax:
      if (pads) h = masked_fill(h, pad_mask, kNegInf);
      h = log_softmax(h, 1);
      if (pads) h = masked_fill(h, pad_mask, 0.0);
      break;
    case Normalization::sigmoid:
      h = sigmoid(h);
      if (pads) h = masked_fill(h, pad_mask, 0.0);
      break;
    case Normalization::tanh:
      h = tanh(h);
      if (pads) h = masked_fill(h, pad_mask, 0.0);
      break;
    case Normalization::none:
      if (pads) h = masked_fill(h, pad_mask, 0.0);
      break;
  }
  return LocalGraph{h, pads ? pad_mask : PadMask{}, params.config.channels};
}

Tensor aggregate(const LocalGraph& graph, const Tensor& features, const PAPoolParams& params) {
  check_neighbor_features(features);
  const auto& ws = graph.weights.shape();
  if (ws.size() != 3 || ws[0] != features.dim(0) || ws[1] != features.dim(1) ||
      (ws[2] != 1 && ws[2] != features.dim(2))) {
    throw DimensionError("graph weights " + shape_to_string(ws) + " do not fit features " +
                         shape_to_string(features.shape()));
  }
  Tensor out = combine_orders(weighted_neighbor_sum(graph.weights, features), params.order_weights);
  if (params.config.activation == Activation::relu) out = relu(out);
  return out;
}

Tensor papool(const Tensor& centers_xyz, const Tensor& neighbors_xyz, const Tensor& features,
              const PAPoolParams& params, const PadMask& pad_mask, LocalGraph* graph_out) {
  check_neighbor_features(features);
  if (features.dim(2) != params.config.channels) {
    throw DimensionError("papool configured for " + std::to_string(params.config.channels) +
                         " channels, features are " + shape_to_string(features.shape()));
  }
  if (!graph_out && !grad_enabled()) {
    params.validate();
    check_mask(pad_mask, features.dim(0), features.dim(1));
    if (centers_xyz.rank() != 2 || centers_xyz.dim(1) != 3 || neighbors_xyz.rank() != 3 ||
        neighbors_xyz.dim(0) != features.dim(0) || neighbors_xyz.dim(1) != features.dim(1) ||
        neighbors_xyz.dim(2) != 3 || centers_xyz.dim(0) != features.dim(0)) {
      throw DimensionError("papool: centers " + shape_to_string(centers_xyz.shape()) + " and neighbors " +
                           shape_to_string(neighbors_xyz.shape()) + " do not fit features " +
                           shape_to_string(features.shape()));
    }
    return papool_forward_only(centers_xyz, neighbors_xyz, features, params, pad_mask);
  }
  auto graph = construct_graph(relative_position_features(centers_xyz, neighbors_xyz), params, pad_mask);
  Tensor out = aggregate(graph, features, params);
  if (graph_out) *graph_out = std::move(graph);
  return out;
}

Tensor max_pool(const Tensor& features, const PadMask& pad_mask) {
  check_neighbor_features(features);
  check_mask(pad_mask, features.dim(0), features.dim(1));
  if (!any_pad(pad_mask)) return reduce_max(features, 1);
  // Slot 0 is always genuine, so a masked slot can never be the maximum.
  return reduce_max(masked_fill(features, pad_mask, -std::numeric_limits<double>::infinity()), 1);
}

Tensor avg_pool(const Tensor& features, const PadMask& pad_mask) {
  check_neighbor_features(features);
  check_mask(pad_mask, features.dim(0), features.dim(1));
  if (!any_pad(pad_mask)) return reduce_mean(features, 1);

  const auto regions = features.dim(0);
  const auto k = features.dim(1);
  const auto c = features.dim(2);
  std::vector<double> inv(regions);
  for (std::size_t r = 0; r < regions; ++r) {
    std::size_t live = 0;
    for (std::size_t j = 0; j < k; ++j) live += pad_mask[r * k + j] ? 0 : 1;
    inv[r] = 1.0 / static_cast<double>(live);
  }
  auto x = features.data();
  Buffer out(regions * c, 0.0);
  for (std::size_t r = 0; r < regions; ++r) {
    for (std::size_t j = 0; j < k; ++j) {
      if (pad_mask[r * k + j]) continue;
      for (std::size_t ch = 0; ch < c; ++ch) out[r * c + ch] += x[(r * k + j) * c + ch];
    }
    for (std::size_t ch = 0; ch < c; ++ch) out[r * c + ch] *= inv[r];
  }
  return Tensor::make_op("avg_pool", {regions, c}, std::move(out), {features},
                         [features, mask = pad_mask, inv = std::move(inv), regions, k, c](const BackwardContext& ctx) {
                           auto g = features.grad_buffer();
                           for (std::size_t r = 0; r < regions; ++r) {
                             for (std::size_t j = 0; j < k; ++j) {
                               if (mask[r * k + j]) continue;
                               for (std::size_t ch = 0; ch < c; ++ch) {
                                 g[(r * k + j) * c + ch] += ctx.out_grad[r * c + ch] * inv[r];
                               }
                             }
                           }
                         });
}

std::vector<WeightRecord> dump_weights(const LocalGraph& graph, std::size_t region,
                                       std::span<const std::size_t> channels) {
  if (region >= graph.regions()) {
    throw ValidationError("region " + std::to_string(region) + " out of range for " +
                          std::to_string(graph.regions()) + " regions");
  }
  for (auto ch : channels) {
    if (ch >= graph.channels) {
      throw ValidationError("channel " + std::to_string(ch) + " out of range for " +
                            std::to_string(graph.channels) + " channels");
    }
  }
  std::vector<WeightRecord> records;
  records.reserve(graph.neighbors() * channels.size());
  for (std::size_t slot = 0; slot < graph.neighbors(); ++slot) {
    const bool pad = !graph.pad_mask.empty() && graph.pad_mask[region * graph.neighbors() + slot] != 0;
    for (auto ch : channels) records.push_back({region, slot, ch, graph.weight(region, slot, ch), pad});
  }
  return records;
}

void write_weights_csv(std::ostream& os, std::span<const WeightRecord> records) {
  os << "region,slot,channel,weight,is_pad\n";
  char buf[64];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof(buf), "%.9g", r.weight);
    os << r.region << ',' << r.slot << ',' << r.channel << ',' << buf << ',' << (r.is_pad ? 1 : 0) << '\n';
  }
}

}  // namespace papool
