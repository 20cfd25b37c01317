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
#include <functional>
#include <string>
#include <string_view>
#include <span>
#include <vector>

#include "papool/tensor.hpp"

namespace papool {

using TensorFn = std::function<Tensor(std::span<const Tensor>)>;

/// Compares reverse-mode gradients of `f` with central differences.
///
/// The output of f is contracted with a fixed pseudo-random vector so that one
/// backward pass checks the full vector-Jacobian product. Returns the largest
/// |analytic - numeric| / max(1, |analytic|, |numeric|) over every input
/// element. `inputs` are copied; the originals are never touched.
double grad_check(const TensorFn& f, std::span<const Tensor> inputs, double eps = 1e-5,
                  std::uint64_t projection_seed = 0x5eed);

}  // namespace papool

namespace papool {

struct GradCheckResult {
  std::string op;
  double max_rel_error = 0.0;
  std::size_t seeds = 0;
  bool passed = false;
};

inline constexpr double kGradCheckTolerance = 1e-4;

/// Names of the operators covered by run_gradcheck_suite, in report order.
std::vector<std::string> gradcheck_operator_names();

/// Checks every registered differentiable operator (or only `only_op` when
/// non-empty) on `seeds` random instances. Throws ValidationError for an
/// unknown operator name.
std::vector<GradCheckResult> run_gradcheck_suite(std::string_view only_op = {}, std::size_t seeds = 20);

}  // namespace papool
