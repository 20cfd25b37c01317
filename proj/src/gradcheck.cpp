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

#include "papool/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "papool/ops.hpp"
#include "papool/rng.hpp"

namespace papool {

namespace {

double project(const Tensor& out, std::span<const double> r) {
  double acc = 0.0;
  auto v = out.data();
  for (std::size_t i = 0; i < v.size(); ++i) acc += v[i] * r[i];
  return acc;
}

}  // namespace

double grad_check(const TensorFn& f, std::span<const Tensor> inputs, double eps, std::uint64_t projection_seed) {
  std::vector<Tensor> leaves;
  leaves.reserve(inputs.size());
  for (const auto& t : inputs) leaves.push_back(Tensor::from(t.shape(), t.to_vector(), true));

  Tensor out = f(leaves);
  Rng rng(projection_seed);
  std::vector<double> r(out.numel());
  for (auto& v : r) v = rng.uniform(-1.0, 1.0);
  const Tensor weights = Tensor::from(out.shape(), r);
  sum(mul(out, weights)).backward();

  double worst = 0.0;
  NoGradGuard no_grad;
  for (auto& leaf : leaves) {
    const auto analytic = leaf.grad();
    auto values = leaf.mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + eps;
      const double up = project(f(leaves), r);
      values[i] = saved - eps;
      const double down = project(f(leaves), r);
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      if (!std::isfinite(numeric) || !std::isfinite(analytic[i])) return std::numeric_limits<double>::infinity();
      const double denom = std::max({1.0, std::abs(analytic[i]), std::abs(numeric)});
      worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace papool
