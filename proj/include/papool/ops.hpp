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
#include <span>
#include <vector>

#include "papool/rng.hpp"
#include "papool/tensor.hpp"

namespace papool {

/// out = x . W + b over the trailing axis of x; leading axes are batch axes.
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

/// max(x, 0); the subgradient at 0 is 0.
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);

/// Max-subtracted exponential normalization along `axis`.
Tensor softmax(const Tensor& x, std::size_t axis);
Tensor log_softmax(const Tensor& x, std::size_t axis);

/// Maximum along `axis`; the gradient goes to the first maximal element.
Tensor reduce_max(const Tensor& x, std::size_t axis);
Tensor reduce_mean(const Tensor& x, std::size_t axis);
Tensor reduce_sum(const Tensor& x, std::size_t axis);
/// Sum of all elements as a scalar.
Tensor sum(const Tensor& x);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);

Tensor concat(std::span<const Tensor> parts, std::size_t axis);
Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis);
Tensor reshape(const Tensor& x, Shape shape);

/// Gathers rows of x ([N, ...]) into [leading..., ...]; backward scatter-adds.
Tensor index_select(const Tensor& x, std::span<const std::size_t> indices, const Shape& leading);

/// Sets entries to `value` where mask is nonzero. The mask addresses every
/// axis but the last and is broadcast over it. Masked entries get no gradient.
Tensor masked_fill(const Tensor& x, std::span<const std::uint8_t> mask, double value);

/// Inverted dropout: zeroes entries with probability p and scales the rest by 1/(1-p).
Tensor dropout(const Tensor& x, double p, Rng& rng);

/// Mean negative log-softmax of the true class over rows of logits [B, classes].
Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> labels);

}  // namespace papool
