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

#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "oracles.hpp"
#include "papool/errors.hpp"
#include "papool/geometry.hpp"
#include "papool/ops.hpp"
#include "papool/pooling.hpp"

using namespace papool;

namespace {

struct Instance {
  std::size_t regions = 0;
  std::size_t k = 0;
  std::size_t channels = 0;
  std::vector<double> centers;
  std::vector<double> neighbors;
  std::vector<double> features;
  PadMask pad;
  PAPoolParams params;

  Tensor centers_t() const { return Tensor::from({regions, 3}, centers); }
  Tensor neighbors_t() const { return Tensor::from({regions, k, 3}, neighbors); }
  Tensor features_t() const { return Tensor::from({regions, k, channels}, features); }
};

Instance random_instance(Rng& rng, Normalization norm, WeightMode mode, bool pads) {
  Instance in;
  in.regions = 1 + rng.below(4);
  in.k = 1 + rng.below(8);
  in.channels = 1 + rng.below(6);
  in.centers = oracle::random_values(rng, in.regions * 3);
  in.neighbors = oracle::random_values(rng, in.regions * in.k * 3);
  in.features = oracle::random_values(rng, in.regions * in.k * in.channels, -2, 2);
  if (pads) {
    in.pad.assign(in.regions * in.k, 0);
    for (std::size_t r = 0; r < in.regions; ++r) {
      for (std::size_t j = 1; j < in.k; ++j) in.pad[r * in.k + j] = rng.uniform() < 0.3 ? 1 : 0;
    }
  }
  PAPoolConfig cfg;
  cfg.channels = in.channels;
  cfg.hidden = {1 + rng.below(8)};
  cfg.normalization = norm;
  cfg.weight_mode = mode;
  cfg.orders = 1 + rng.below(2);
  cfg.per_channel_order_weights = rng.uniform() < 0.5;
  cfg.activation = rng.uniform() < 0.5 ? Activation::identity : Activation::relu;
  in.params = PAPoolParams::init(cfg, rng);
  for (auto& w : in.params.order_weights.mutable_data()) w = rng.uniform(0.5, 1.5);
  return in;
}

void zero_final_layer(PAPoolParams& p) {
  for (auto& v : p.encoder.back().weight.mutable_data()) v = 0.0;
  for (auto& v : p.encoder.back().bias.mutable_data()) v = 0.0;
}

// Applies a per-region permutation of neighbor slots to an [R, K, W] array.
std::vector<double> permute_slots(const std::vector<double>& v, std::size_t regions, std::size_t k, std::size_t w,
                                  const std::vector<std::size_t>& perm) {
  std::vector<double> out(v.size());
  for (std::size_t r = 0; r < regions; ++r) {
    for (std::size_t j = 0; j < k; ++j) {
      std::copy_n(v.begin() + static_cast<std::ptrdiff_t>((r * k + perm[j]) * w), w,
                  out.begin() + static_cast<std::ptrdiff_t>((r * k + j) * w));
    }
  }
  return out;
}

const Normalization kAllNorms[] = {Normalization::softmax, Normalization::logsoftmax, Normalization::sigmoid,
                                   Normalization::tanh, Normalization::none};

}  // namespace

TEST_CASE("construct_graph: zero final layer gives uniform weights over live slots") {
  Rng rng(1);
  auto in = random_instance(rng, Normalization::softmax, WeightMode::channel_wise, true);
  zero_final_layer(in.params);
  auto relpos = relative_position_features(in.centers_t(), in.neighbors_t());
  auto g = construct_graph(relpos, in.params, in.pad);
  for (std::size_t r = 0; r < in.regions; ++r) {
    std::size_t live = 0;
    for (std::size_t j = 0; j < in.k; ++j) live += in.pad[r * in.k + j] ? 0 : 1;
    for (std::size_t j = 0; j < in.k; ++j) {
      for (std::size_t c = 0; c < in.channels; ++c) {
        const double expect = in.pad[r * in.k + j] ? 0.0 : 1.0 / static_cast<double>(live);
        CHECK(g.weight(r, j, c) == doctest::Approx(expect).epsilon(1e-15));
      }
    }
  }
}

TEST_CASE("construct_graph: identical neighbor positions give uniform weights") {
  Rng rng(2);
  PAPoolConfig cfg;
  cfg.channels = 3;
  auto params = PAPoolParams::init(cfg, rng);
  std::vector<double> nb;
  for (int j = 0; j < 5; ++j) nb.insert(nb.end(), {0.3, -0.2, 0.7});
  auto g = construct_graph(relative_position_features(Tensor::from({1, 3}, {0, 0, 0}), Tensor::from({1, 5, 3}, nb)),
                           params);
  for (std::size_t j = 0; j < 5; ++j) {
    for (std::size_t c = 0; c < 3; ++c) CHECK(g.weight(0, j, c) == doctest::Approx(0.2).epsilon(1e-14));
  }
}

TEST_CASE("construct_graph: softmax weights are a distribution and match the naive reference") {
  Rng rng(3);
  for (int trial = 0; trial < 40; ++trial) {
    const auto mode = trial % 2 ? WeightMode::channel_wise : WeightMode::channel_agnostic;
    auto in = random_instance(rng, Normalization::softmax, mode, trial % 3 == 0);
    auto g = construct_graph(relative_position_features(in.centers_t(), in.neighbors_t()), in.params, in.pad);
    const auto ref = oracle::naive_graph_weights(in.centers, in.neighbors, in.regions, in.k,
                                                 oracle::layers_of(in.params), Normalization::softmax, in.pad);
    CHECK(oracle::max_abs_diff(g.weights.to_vector(), ref) <= 1e-9);
    const auto width = in.params.config.weight_width();
    for (std::size_t r = 0; r < in.regions; ++r) {
      for (std::size_t c = 0; c < width; ++c) {
        double s = 0.0;
        for (std::size_t j = 0; j < in.k; ++j) {
          const double w = g.weight(r, j, c);
          if (in.pad.empty() || !in.pad[r * in.k + j]) {
            CHECK(w > 0.0);
            CHECK(w <= 1.0);
          }
          s += w;
        }
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("construct_graph: encoder width mismatch is a configuration error") {
  Rng rng(4);
  PAPoolConfig cfg;
  cfg.channels = 4;
  auto params = PAPoolParams::init(cfg, rng);
  params.encoder.back() = LinearLayer::init(32, 5, rng);
  CHECK_THROWS_AS(construct_graph(Tensor::zeros({1, 2, 4}), params), ConfigError);
}

TEST_CASE("aggregate: convex combination and reduction to the mean") {
  Rng rng(5);
  PAPoolConfig cfg;
  cfg.channels = 1;
  auto params = PAPoolParams::init(cfg, rng);
  LocalGraph g{Tensor::from({1, 2, 1}, {0.25, 0.75}), {}, 1};
  CHECK(aggregate(g, Tensor::from({1, 2, 1}, {4, 8}), params).item() == doctest::Approx(7.0));

  cfg.channels = 3;
  auto p3 = PAPoolParams::init(cfg, rng);
  auto feats = oracle::random_tensor(rng, {2, 4, 3});
  LocalGraph uniform{Tensor::full({2, 4, 3}, 0.25), {}, 3};
  CHECK(oracle::max_abs_diff(aggregate(uniform, feats, p3).to_vector(), reduce_mean(feats, 1).to_vector()) <= 1e-15);
}

TEST_CASE("papool: matches the naive reference for every normalization and weight mode") {
  Rng rng(6);
  for (auto norm : kAllNorms) {
    for (auto mode : {WeightMode::channel_wise, WeightMode::channel_agnostic}) {
      for (int trial = 0; trial < 10; ++trial) {
        auto in = random_instance(rng, norm, mode, trial % 2 == 0);
        const auto ref = oracle::naive_papool(in.centers, in.neighbors, in.features, in.regions, in.k, in.channels,
                                              in.params, in.pad);
        // Recorded path (parameters require gradients).
        auto taped = papool::papool(in.centers_t(), in.neighbors_t(), in.features_t(), in.params, in.pad);
        CHECK(oracle::max_abs_diff(taped.to_vector(), ref) <= 1e-9);
        // Forward-only path.
        NoGradGuard guard;
        auto fast = papool::papool(in.centers_t(), in.neighbors_t(), in.features_t(), in.params, in.pad);
        CHECK(oracle::max_abs_diff(fast.to_vector(), ref) <= 1e-9);
      }
    }
  }
}

TEST_CASE("papool: zero final layer reduces to masked average pooling") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    auto in = random_instance(rng, Normalization::softmax, WeightMode::channel_wise, true);
    in.params.config.activation = Activation::identity;
    // First order weight row set to 1, the others to 0.
    auto w = in.params.order_weights.mutable_data();
    const std::size_t row = in.params.order_weights.rank() == 2 ? in.channels : 1;
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = i < row ? 1.0 : 0.0;
    zero_final_layer(in.params);
    auto out = papool::papool(in.centers_t(), in.neighbors_t(), in.features_t(), in.params, in.pad);
    CHECK(oracle::max_abs_diff(out.to_vector(), avg_pool(in.features_t(), in.pad).to_vector()) <= 1e-9);
  }
}

TEST_CASE("pooling operators are invariant to neighbor permutation") {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    auto in = random_instance(rng, Normalization::softmax, WeightMode::channel_wise, true);
    std::vector<std::size_t> perm(in.k);
    std::iota(perm.begin(), perm.end(), 0);
    shuffle(perm.begin(), perm.end(), rng);
    PadMask pad(in.pad.size());
    for (std::size_t r = 0; r < in.regions; ++r) {
      for (std::size_t j = 0; j < in.k; ++j) pad[r * in.k + j] = in.pad[r * in.k + perm[j]];
    }
    const Tensor nb = Tensor::from({in.regions, in.k, 3}, permute_slots(in.neighbors, in.regions, in.k, 3, perm));
    const Tensor ft =
        Tensor::from({in.regions, in.k, in.channels}, permute_slots(in.features, in.regions, in.k, in.channels, perm));
    auto a = papool::papool(in.centers_t(), in.neighbors_t(), in.features_t(), in.params, in.pad);
    auto b = papool::papool(in.centers_t(), nb, ft, in.params, pad);
    CHECK(oracle::max_abs_diff(a.to_vector(), b.to_vector()) <= 1e-9);
    CHECK(oracle::max_abs_diff(avg_pool(in.features_t(), in.pad).to_vector(), avg_pool(ft, pad).to_vector()) <= 1e-9);
    // Max pooling needs a genuine slot 0 after permutation; compare without pads.
    CHECK(max_pool(in.features_t()).to_vector() == max_pool(ft).to_vector());
  }
}

TEST_CASE("papool is invariant to translating centers and neighbors together") {
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    auto in = random_instance(rng, kAllNorms[trial % 5], WeightMode::channel_wise, trial % 2 == 0);
    const double t[3] = {rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5)};
    auto c = in.centers;
    auto n = in.neighbors;
    for (std::size_t i = 0; i < c.size(); ++i) c[i] += t[i % 3];
    for (std::size_t i = 0; i < n.size(); ++i) n[i] += t[i % 3];
    auto a = papool::papool(in.centers_t(), in.neighbors_t(), in.features_t(), in.params, in.pad);
    auto b = papool::papool(Tensor::from({in.regions, 3}, c), Tensor::from({in.regions, in.k, 3}, n), in.features_t(),
                            in.params, in.pad);
    CHECK(oracle::max_abs_diff(a.to_vector(), b.to_vector()) <= 1e-9);
  }
}

TEST_CASE("papool: full gradient matches finite differences") {
  Rng rng(10);
  for (int trial = 0; trial < 6; ++trial) {
    auto in = random_instance(rng, kAllNorms[trial % 5], WeightMode::channel_wise, trial % 2 == 0);
    in.params.config.activation = Activation::identity;
    const auto cfg = in.params.config;
    const auto r = oracle::random_tensor(rng, {in.regions, in.channels});
    std::vector<Tensor> inputs{in.centers_t(), in.features_t()};
    for (const auto& l : in.params.encoder) {
      inputs.push_back(l.weight);
      inputs.push_back(l.bias);
    }
    inputs.push_back(in.params.order_weights);
    // Neighbors sit in a separate shell so no relative position is near zero length.
    auto nb = in.neighbors;
    for (auto& v : nb) v = v * 0.5 + (v >= 0 ? 2.0 : -2.0);
    const Tensor neighbors = Tensor::from({in.regions, in.k, 3}, nb);
    const PadMask pad = in.pad;
    auto f = [&](const std::vector<Tensor>& t) {
      PAPoolParams p;
      p.config = cfg;
      std::size_t i = 2;
      for (std::size_t l = 0; l < cfg.hidden.size() + 1; ++l, i += 2) p.encoder.push_back(LinearLayer{t[i], t[i + 1]});
      p.order_weights = t[i];
      return sum(mul(papool::papool(t[0], neighbors, t[1], p, pad), r));
    };
    CHECK(oracle::finite_difference_error(f, inputs) < 1e-4);
  }
}

TEST_CASE("max_pool and avg_pool: values and gradients") {
  CHECK(max_pool(Tensor::from({1, 2, 2}, {1, 5, 3, 2})).to_vector() == std::vector<double>{3, 5});
  auto single = Tensor::from({2, 1, 2}, {1, 2, 3, 4});
  CHECK(max_pool(single).to_vector() == single.to_vector());
  CHECK(avg_pool(Tensor::full({1, 3, 2}, -1.5)).to_vector() == std::vector<double>{-1.5, -1.5});

  auto x = Tensor::zeros({1, 4, 1}, true);
  const PadMask pad{0, 0, 1, 0};
  sum(avg_pool(x, pad)).backward();
  const auto g = x.grad();
  CHECK(g[0] == doctest::Approx(1.0 / 3.0));
  CHECK(g[2] == 0.0);
  // Pads never win the max even when they hold the largest value.
  CHECK(max_pool(Tensor::from({1, 2, 1}, {1, 9}), PadMask{0, 1}).item() == 1.0);
}

TEST_CASE("dump_weights: uniform rows, visualization shape and pads") {
  Rng rng(11);
  PAPoolConfig cfg;
  cfg.channels = 1;
  auto params = PAPoolParams::init(cfg, rng);
  zero_final_layer(params);
  auto relpos = relative_position_features(oracle::random_tensor(rng, {1, 3}), oracle::random_tensor(rng, {1, 4, 3}));
  auto g = construct_graph(relpos, params);
  const std::vector<std::size_t> ch0{0};
  const auto rows = dump_weights(g, 0, ch0);
  REQUIRE(rows.size() == 4);
  for (const auto& row : rows) CHECK(row.weight == doctest::Approx(0.25));

  cfg.channels = 16;
  auto p16 = PAPoolParams::init(cfg, rng);
  auto big = construct_graph(
      relative_position_features(oracle::random_tensor(rng, {2, 3}), oracle::random_tensor(rng, {2, 64, 3})), p16);
  std::vector<std::size_t> nine(9);
  std::iota(nine.begin(), nine.end(), 0);
  const auto dump = dump_weights(big, 1, nine);
  CHECK(dump.size() == 576);
  for (std::size_t c = 0; c < 9; ++c) {
    double s = 0.0;
    for (const auto& row : dump) s += row.channel == c ? row.weight : 0.0;
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK_THROWS_AS(dump_weights(big, 2, nine), ValidationError);

  const PadMask pad{0, 1, 0, 1};
  auto padded = construct_graph(
      relative_position_features(oracle::random_tensor(rng, {1, 3}), oracle::random_tensor(rng, {1, 4, 3})), p16, pad);
  for (const auto& row : dump_weights(padded, 0, nine)) {
    CHECK(row.is_pad == (row.slot % 2 == 1));
    if (row.is_pad) CHECK(row.weight == 0.0);
  }
  std::ostringstream os;
  write_weights_csv(os, dump_weights(padded, 0, ch0));
  CHECK(os.str().rfind("region,slot,channel,weight,is_pad\n", 0) == 0);
}
