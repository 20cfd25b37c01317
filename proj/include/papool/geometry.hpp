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

#include "papool/tensor.hpp"

namespace papool {

/// Per-slot flag marking duplicated neighbor slots; empty means "no pads".
using PadMask = std::vector<std::uint8_t>;

/// Raw XYZ points [N, 3] with optional per-point features [N, C].
struct PointCloud {
  Tensor points;
  Tensor features;

  static PointCloud from_xyz(std::vector<double> xyz);
  std::size_t size() const { return points.defined() ? points.dim(0) : 0; }
  /// Throws ValidationError unless N >= 1, shape is [N, 3] and coordinates are finite.
  void validate() const;
};

/// Centers plus a fixed-width neighbor table for each of them.
struct Grouping {
  std::vector<std::size_t> centers;
  std::size_t k = 0;
  std::vector<std::size_t> neighbors;  // centers.size() x k, row-major
  PadMask pad_mask;                    // same layout as neighbors

  std::size_t num_centers() const { return centers.size(); }
  std::size_t neighbor(std::size_t region, std::size_t slot) const { return neighbors[region * k + slot]; }
  bool is_pad(std::size_t region, std::size_t slot) const { return pad_mask[region * k + slot] != 0; }
};

/// Greedy max-min selection of m indices, starting at `start`.
std::vector<std::size_t> farthest_point_sample(const PointCloud& cloud, std::size_t m, std::size_t start = 0);

/// The k nearest points of each center (center included), sorted by
/// (distance, index).
std::vector<std::size_t> knn(const PointCloud& cloud, std::span<const std::size_t> centers, std::size_t k);

/// Up to k points within `radius` of each center, lowest indices first. Short
/// rows are padded with the first qualifying index and flagged in the mask.
Grouping ball_query(const PointCloud& cloud, std::span<const std::size_t> centers, double radius, std::size_t k);

/// knn wrapped as a Grouping with an all-false pad mask.
Grouping knn_grouping(const PointCloud& cloud, std::span<const std::size_t> centers, std::size_t k);

/// Gathers features [N, C] into [N_p, K, C]. Differentiable (scatter-add backward).
Tensor group(const Tensor& features, const Grouping& grouping);

/// Relative-position encoding: per neighbor, (center - neighbor)
/// followed by its Euclidean length. [N_p, 3] x [N_p, K, 3] -> [N_p, K, 4].
/// The length gradient at a zero offset is defined as 0.
Tensor relative_position_features(const Tensor& centers_xyz, const Tensor& neighbors_xyz);

}  // namespace papool
