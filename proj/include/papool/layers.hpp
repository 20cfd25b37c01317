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
#include <functional>
#include <string>

#include "papool/rng.hpp"
#include "papool/tensor.hpp"

namespace papool {

/// Called once per learnable tensor with its stable dotted name.
using ParameterVisitor = std::function<void(const std::string& name, Tensor& parameter)>;

/// Dense layer y = x W + b with W [in, out].
struct LinearLayer {
  Tensor weight;
  Tensor bias;

  /// Weights uniform in +-sqrt(6 / (in + out)), biases zero.
  static LinearLayer init(std::size_t in, std::size_t out, Rng& rng);

  std::size_t in_features() const { return weight.dim(0); }
  std::size_t out_features() const { return weight.dim(1); }
  Tensor operator()(const Tensor& x) const;
  void visit(const std::string& prefix, const ParameterVisitor& fn);
};

}  // namespace papool
