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

#include <algorithm>
#include <cmath>

#include "papool/errors.hpp"
#include "papool/geometry.hpp"
#include "papool/gradcheck.hpp"
#include "papool/ops.hpp"
#include "papool/pooling.hpp"

namespace papool {

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor::from(std::move(shape), std::move(v));
}

// Values kept at least 1e-3 away from zero so relu's kink stays out of reach.
Tensor off_kink(Shape shape, Rng& rng) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) {
    do {
      x = rng.uniform(-1.0, 1.0);
    } while (std::abs(x) < 1e-3);
  }
  return Tensor::from(std::move(shape), std::move(v));
}

PadMask random_mask(std::size_t regions, std::size_t k, Rng& rng) {
  PadMask mask(regions * k, 0);
  for (std::size_t r = 0; r < regions; ++r) {
    for (std::size_t j = 1; j < k; ++j) mask[r * k + j] = rng.uniform() < 0.25 ? 1 : 0;
  }
  return mask;
}

// Neighbor coordinates at least 1e-3 from their center so the length stays smooth.
Tensor separated_neighbors(const Tensor& centers, std::size_t k, Rng& rng) {
  const auto regions = centers.dim(0);
  std::vector<double> v(regions * k * 3);
  auto c = centers.data();
  for (std::size_t r = 0; r < regions; ++r) {
    for (std::size_t j = 0; j < k; ++j) {
      double* p = v.data() + (r * k + j) * 3;
      double d2 = 0.0;
      do {
        d2 = 0.0;
        for (int a = 0; a < 3; ++a) {
          p[a] = rng.uniform(-1.0, 1.0);
          d2 += (p[a] - c[3 * r + a]) * (p[a] - c[3 * r + a]);
        }
      } while (d2 < 1e-6);
    }
  }
  return Tensor::from({regions, k, 3}, std::move(v));
}

PAPoolParams params_from(const std::vector<Tensor>& in, std::size_t first, const PAPoolConfig& config) {
  PAPoolParams p;
  p.config = config;
  const auto layers = config.encoder_depth();
  for (std::size_t l = 0; l < layers; ++l) p.encoder.push_back({in[first + 2 * l], in[first + 2 * l + 1]});
  p.order_weights = in[first + 2 * layers];
  return p;
}

void push_params(std::vector<Tensor>& in, const PAPoolParams& p, Rng& rng) {
  for (const auto& layer : p.encoder) {
    in.push_back(layer.weight);
    in.push_back(random_tensor(layer.bias.shape(), rng, -0.5, 0.5));
  }
  in.push_back(random_tensor(p.order_weights.shape(), rng, 0.5, 1.5));
}

using Case = std::function<double(Rng&)>;

std::vector<std::pair<std::string, Case>> registry() {
  std::vector<std::pair<std::string, Case>> ops;
  ops.emplace_back("linear", [](Rng& rng) {
    std::vector<Tensor> in{random_tensor({4, 3}, rng), random_tensor({3, 2}, rng), random_tensor({2}, rng)};
    return grad_check([](std::span<const Tensor> x) { return linear(x[0], x[1], x[2]); }, in);
  });
  ops.emplace_back("relu", [](Rng& rng) {
    std::vector<Tensor> in{off_kink({5, 4}, rng)};
    return grad_check([](std::span<const Tensor> x) { return relu(x[0]); }, in);
  });
  ops.emplace_back("sigmoid", [](Rng& rng) {
    std::vector<Tensor> in{random_tensor({5, 4}, rng, -3.0, 3.0)};
    return grad_check([](std::span<const Tensor> x) { return sigmoid(x[0]); }, in);
  });
  ops.emplace_back("tanh", [](Rng& rng) {
    std::vector<Tensor> in{random_tensor({5, 4}, rng, -3.0, 3.0)};
    return grad_check([](std::span<const Tensor> x) { return tanh(x[0]); }, in);
  });
  ops.emplace_back("softmax", [](Rng& rng) {
    std::vector<Tensor> in{random_tensor({3, 5, 2}, rng, -2.0, 2.0)};
    return grad_check([](std::span<const Tensor> x) { return softmax(x[0], 1); }, in);
  });
  ops.emplace_back("log_softmax", [](Rng& rng) {
    std::vector<Tensor> in{random_tensor({3, 5, 2}, rng, -2.0, 2.0)};
    return grad_check([](std::span<const Tensor> x) { return log_softmax(x[0], 1); }, in);
  });
  ops.emplace_back("reduce_max", [](Rng& rng) {
    std::vector<Tensor> in{random_tensor({3, 5, 2}, rng)};
    return grad_check([](std::span<const Tensor> x) { return reduce_max(x[0], 1); }, in);
  });
  ops.emplace_back("reduce_mean", [](Rng& rng) {
    std::vector<Tensor> in{random_tensor({3, 5, 2}, rng)};
    return grad_check([](std::span<const Tensor> x) { return reduce_mean(x[0], 1); }, in);
  });
  ops.emplace_back("add", [](Rng& rng) {
    std::vector<Tensor> in{random_tensor({4, 3}, rng), random_tensor({4, 3}, rng)};
    return grad_check([](std::span<const Tensor> x) { return add(x[0], x[1]); }, in);
  });
  ops.emplace_back("mul", [](Rng& rng) {
    std::vector<Tensor> in{random_tensor({4, 3}, rng), random_tensor({4, 3}, rng)};
    return grad_check([](std::span<const Tensor> x) { return mul(x[0], x[1]); }, in);
  });
  ops.emplace_back("concat", [](Rng& rng) {
    std::vector<Tensor> in{random_tensor({2, 3, 2}, rng), random_tensor({2, 1, 2}, rng)};
    return grad_check([](std::span<const Tensor> x) { return concat({x[0], x[1]}, 1); }, in);
  });
  ops.emplace_back("masked_fill", [](Rng& rng) {
    std::vector<Tensor> in{random_tensor({3, 4, 2}, rng)};
    const auto mask = random_mask(3, 4, rng);
    return grad_check([mask](std::span<const Tensor> x) { return masked_fill(x[0], mask, 0.0); }, in);
  });
  ops.emplace_back("cross_entropy", [](Rng& rng) {
    std::vector<Tensor> in{random_tensor({3, 4}, rng, -2.0, 2.0)};
    std::vector<std::size_t> labels{rng.below(4), rng.below(4), rng.below(4)};
    return grad_check([labels](std::span<const Tensor> x) { return cross_entropy(x[0], labels); }, in);
  });
  ops.emplace_back("group", [](Rng& rng) {
    std::vector<Tensor> in{random_tensor({6, 3}, rng)};
    Grouping g;
    g.centers = {0, 1};
    g.k = 4;
    for (std::size_t i = 0; i < 8; ++i) g.neighbors.push_back(rng.below(6));
    g.pad_mask.assign(8, 0);
    return grad_check([g](std::span<const Tensor> x) { return group(x[0], g); }, in);
  });
  ops.emplace_back("relative_position", [](Rng& rng) {
    const Tensor centers = random_tensor({3, 3}, rng);
    std::vector<Tensor> in{centers, separated_neighbors(centers, 4, rng)};
    return grad_check([](std::span<const Tensor> x) { return relative_position_features(x[0], x[1]); }, in);
  });
  ops.emplace_back("construct_graph", [](Rng& rng) {
    PAPoolConfig config;
    config.channels = 3;
    config.hidden = {5};
    const auto p = PAPoolParams::init(config, rng);
    std::vector<Tensor> in{random_tensor({2, 4, 4}, rng)};
    push_params(in, p, rng);
    const auto mask = random_mask(2, 4, rng);
    return grad_check(
        [config, mask](std::span<const Tensor> x) {
          const std::vector<Tensor> v(x.begin(), x.end());
          return construct_graph(v[0], params_from(v, 1, config), mask).weights;
        },
        in);
  });
  ops.emplace_back("aggregate", [](Rng& rng) {
    PAPoolConfig config;
    config.channels = 3;
    config.orders = 2;
    config.per_channel_order_weights = rng.uniform() < 0.5;
    const auto p = PAPoolParams::init(config, rng);
    std::vector<Tensor> in{random_tensor({2, 4, 3}, rng, 0.0, 1.0), random_tensor({2, 4, 3}, rng),
                           random_tensor(p.order_weights.shape(), rng)};
    return grad_check(
        [p](std::span<const Tensor> x) {
          PAPoolParams q = p;
          q.order_weights = x[2];
          return aggregate(LocalGraph{x[0], {}, 3}, x[1], q);
        },
        in);
  });
  ops.emplace_back("papool", [](Rng& rng) {
    PAPoolConfig config;
    config.channels = 4;
    config.hidden = {6};
    config.weight_mode = rng.uniform() < 0.5 ? WeightMode::channel_wise : WeightMode::channel_agnostic;
    const auto p = PAPoolParams::init(config, rng);
    const Tensor centers = random_tensor({3, 3}, rng);
    std::vector<Tensor> in{centers, separated_neighbors(centers, 5, rng), random_tensor({3, 5, 4}, rng)};
    push_params(in, p, rng);
    const auto mask = random_mask(3, 5, rng);
    return grad_check(
        [config, mask](std::span<const Tensor> x) {
          const std::vector<Tensor> v(x.begin(), x.end());
          return papool(v[0], v[1], v[2], params_from(v, 3, config), mask);
        },
        in);
  });
  ops.emplace_back("max_pool", [](Rng& rng) {
    std::vector<Tensor> in{random_tensor({3, 5, 2}, rng)};
    const auto mask = random_mask(3, 5, rng);
    return grad_check([mask](std::span<const Tensor> x) { return max_pool(x[0], mask); }, in);
  });
  ops.emplace_back("avg_pool", [](Rng& rng) {
    std::vector<Tensor> in{random_tensor({3, 5, 2}, rng)};
    const auto mask = random_mask(3, 5, rng);
    return grad_check([mask](std::span<const Tensor> x) { return avg_pool(x[0], mask); }, in);
  });
  return ops;
}

}  // namespace

std::vector<std::string> gradcheck_operator_names() {
  std::vector<std::string> names;
  for (const auto& [name, fn] : registry()) names.push_back(name);
  return names;
}

std::vector<GradCheckResult> run_gradcheck_suite(std::string_view only_op, std::size_t seeds) {
  const auto ops = registry();
  if (!only_op.empty() &&
      std::none_of(ops.begin(), ops.end(), [&](const auto& entry) { return entry.first == only_op; })) {
    throw ValidationError("unknown operator '" + std::string(only_op) + "'");
  }
  std::vector<GradCheckResult> results;
  for (const auto& [name, run] : ops) {
    if (!only_op.empty() && name != only_op) continue;
    GradCheckResult r;
    r.op = name;
    r.seeds = seeds;
    for (std::size_t s = 0; s < seeds; ++s) {
      Rng rng(derive_seed(s + 1, name));
      r.max_rel_error = std::max(r.max_rel_error, run(rng));
    }
    r.passed = r.max_rel_error < kGradCheckTolerance;
    results.push_back(r);
  }
  return results;
}

}  // namespace papool
