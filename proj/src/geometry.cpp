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

#include "papool/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "papool/errors.hpp"
#include "papool/ops.hpp"

namespace papool {

namespace {

double squared_distance(std::span<const double> xyz, std::size_t a, std::size_t b) {
  const double dx = xyz[3 * a] - xyz[3 * b];
  const double dy = xyz[3 * a + 1] - xyz[3 * b + 1];
  const double dz = xyz[3 * a + 2] - xyz[3 * b + 2];
  return dx * dx + dy * dy + dz * dz;
}

void check_centers(const PointCloud& cloud, std::span<const std::size_t> centers) {
  for (auto c : centers) {
    if (c >= cloud.size()) {
      throw ValidationError("center index " + std::to_string(c) + " out of range for " +
                            std::to_string(cloud.size()) + " points");
    }
  }
}

}  // namespace

PointCloud PointCloud::from_xyz(std::vector<double> xyz) {
  if (xyz.size() % 3 != 0) throw DimensionError("xyz buffer length is not a multiple of 3");
  const auto n = xyz.size() / 3;
  return PointCloud{Tensor::from({n, 3}, std::move(xyz)), Tensor{}};
}

void PointCloud::validate() const {
  if (!points.defined() || points.rank() != 2 || points.dim(1) != 3) {
    throw ValidationError("point cloud must be an [N, 3] tensor");
  }
  if (points.dim(0) == 0) throw ValidationError("point cloud is empty");
  for (double v : points.data()) {
    if (!std::isfinite(v)) throw ValidationError("point cloud has a non-finite coordinate");
  }
  if (features.defined() && (features.rank() != 2 || features.dim(0) != points.dim(0))) {
    throw ValidationError("features must be [N, C] with N = " + std::to_string(points.dim(0)));
  }
}

std::vector<std::size_t> farthest_point_sample(const PointCloud& cloud, std::size_t m, std::size_t start) {
  const auto n = cloud.size();
  if (m < 1 || m > n) {
    throw ValidationError("cannot sample " + std::to_string(m) + " of " + std::to_string(n) + " points");
  }
  if (start >= n) throw ValidationError("start index " + std::to_string(start) + " out of range");
  auto xyz = cloud.points.data();

  std::vector<std::size_t> picked{start};
  picked.reserve(m);
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  std::vector<std::uint8_t> taken(n, 0);
  taken[start] = 1;
  std::size_t last = start;
  while (picked.size() < m) {
    std::size_t best = 0;
    double best_d = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], squared_distance(xyz, i, last));
      if (!taken[i] && nearest[i] > best_d) {
        best_d = nearest[i];
        best = i;
      }
    }
    picked.push_back(best);
    taken[best] = 1;
    last = best;
  }
  return picked;
}

std::vector<std::size_t> knn(const PointCloud& cloud, std::span<const std::size_t> centers, std::size_t k) {
  const auto n = cloud.size();
  if (k < 1 || k > n) {
    throw ValidationError("k = " + std::to_string(k) + " must lie in [1, " + std::to_string(n) + "]");
  }
  check_centers(cloud, centers);
  auto xyz = cloud.points.data();

  std::vector<std::size_t> out;
  out.reserve(centers.size() * k);
  std::vector<std::pair<double, std::size_t>> dist(n);
  for (auto c : centers) {
    for (std::size_t i = 0; i < n; ++i) dist[i] = {squared_distance(xyz, c, i), i};
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
    for (std::size_t j = 0; j < k; ++j) out.push_back(dist[j].second);
  }
  return out;
}

Grouping knn_grouping(const PointCloud& cloud, std::span<const std::size_t> centers, std::size_t k) {
  Grouping g;
  g.centers.assign(centers.begin(), centers.end());
  g.k = k;
  g.neighbors = knn(cloud, centers, k);
  g.pad_mask.assign(g.neighbors.size(), 0);
  return g;
}

Grouping ball_query(const PointCloud& cloud, std::span<const std::size_t> centers, double radius, std::size_t k) {
  if (!(radius > 0.0)) throw ValidationError("ball query radius must be positive");
  if (k < 1) throw ValidationError("ball query needs k >= 1");
  check_centers(cloud, centers);
  const auto n = cloud.size();
  auto xyz = cloud.points.data();
  const double r2 = radius * radius;

  Grouping g;
  g.centers.assign(centers.begin(), centers.end());
  g.k = k;
  g.neighbors.reserve(centers.size() * k);
  g.pad_mask.reserve(centers.size() * k);
  for (auto c : centers) {
    std::size_t found = 0;
    std::size_t first = c;
    for (std::size_t i = 0; i < n && found < k; ++i) {
      if (squared_distance(xyz, c, i) <= r2) {
        if (found == 0) first = i;
        g.neighbors.push_back(i);
        g.pad_mask.push_back(0);
        ++found;
      }
    }
    for (; found < k; ++found) {
      g.neighbors.push_back(first);
      g.pad_mask.push_back(1);
    }
  }
  return g;
}

Tensor group(const Tensor& features, const Grouping& grouping) {
  if (features.rank() != 2) throw DimensionError("group expects [N, C] features, got " + shape_to_string(features.shape()));
  return index_select(features, grouping.neighbors, {grouping.num_centers(), grouping.k});
}

Tensor relative_position_features(const Tensor& centers_xyz, const Tensor& neighbors_xyz) {
  if (centers_xyz.rank() != 2 || centers_xyz.dim(1) != 3 || neighbors_xyz.rank() != 3 ||
      neighbors_xyz.dim(0) != centers_xyz.dim(0) || neighbors_xyz.dim(2) != 3) {
    throw DimensionError("relative_position_features: centers " + shape_to_string(centers_xyz.shape()) +
                         " and neighbors " + shape_to_string(neighbors_xyz.shape()));
  }
  const auto regions = neighbors_xyz.dim(0);
  const auto k = neighbors_xyz.dim(1);
  auto c = centers_xyz.data();
  auto p = neighbors_xyz.data();
  Buffer out(regions * k * 4);
  for (std::size_t r = 0; r < regions; ++r) {
    for (std::size_t j = 0; j < k; ++j) {
      const double* nb = p.data() + (r * k + j) * 3;
      double* dst = out.data() + (r * k + j) * 4;
      dst[0] = c[3 * r] - nb[0];
      dst[1] = c[3 * r + 1] - nb[1];
      dst[2] = c[3 * r + 2] - nb[2];
      dst[3] = std::sqrt(dst[0] * dst[0] + dst[1] * dst[1] + dst[2] * dst[2]);
    }
  }
  return Tensor::make_op(
      "relative_position", {regions, k, 4}, std::move(out), {centers_xyz, neighbors_xyz},
      [centers_xyz, neighbors_xyz, regions, k](const BackwardContext& ctx) {
        const bool gc = centers_xyz.requires_grad();
        const bool gn = neighbors_xyz.requires_grad();
        std::span<double> dc = gc ? centers_xyz.grad_buffer() : std::span<double>{};
        std::span<double> dn = gn ? neighbors_xyz.grad_buffer() : std::span<double>{};
        for (std::size_t r = 0; r < regions; ++r) {
          for (std::size_t j = 0; j < k; ++j) {
            const auto row = r * k + j;
            const double* y = ctx.out_value.data() + row * 4;
            const double* g = ctx.out_grad.data() + row * 4;
            const double norm = y[3];
            for (std::size_t a = 0; a < 3; ++a) {
              // d(diff_a) = g_a + g_norm * diff_a / |diff|
              const double d = g[a] + (norm > 0.0 ? g[3] * y[a] / norm : 0.0);
              if (gc) dc[3 * r + a] += d;
              if (gn) dn[row * 3 + a] -= d;
            }
          }
        }
      });
}

}  // namespace papool
