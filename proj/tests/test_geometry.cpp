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
#include <limits>

#include "oracles.hpp"
#include "papool/errors.hpp"
#include "papool/geometry.hpp"

using namespace papool;

namespace {

std::vector<double> random_xyz(Rng& rng, std::size_t n) { return oracle::random_values(rng, 3 * n); }

}  // namespace

TEST_CASE("fps: hand example and full permutation") {
  auto cloud = PointCloud::from_xyz({0, 0, 0, 1, 0, 0, 0.1, 0, 0, 2, 0, 0});
  CHECK(farthest_point_sample(cloud, 2, 0) == std::vector<std::size_t>{0, 3});

  Rng rng(1);
  auto xyz = random_xyz(rng, 20);
  auto all = farthest_point_sample(PointCloud::from_xyz(xyz), 20, 0);
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> expected(20);
  std::iota(expected.begin(), expected.end(), 0);
  CHECK(all == expected);
}

TEST_CASE("fps: coincident points still yield distinct indices") {
  auto cloud = PointCloud::from_xyz({0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 1});
  auto pick = farthest_point_sample(cloud, 4, 0);
  std::sort(pick.begin(), pick.end());
  CHECK(pick == std::vector<std::size_t>{0, 1, 2, 3});
}

TEST_CASE("fps: max-min property on random clouds") {
  Rng rng(2);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 2 + rng.below(40);
    const std::size_t m = 1 + rng.below(n);
    auto xyz = random_xyz(rng, n);
    const auto chosen = farthest_point_sample(PointCloud::from_xyz(xyz), m, 0);
    CHECK(chosen.size() == m);
    CHECK(chosen.front() == 0);
    CHECK(oracle::check_max_min(xyz, chosen) == "");
  }
}

TEST_CASE("fps: rejects m larger than the cloud") {
  CHECK_THROWS_AS(farthest_point_sample(PointCloud::from_xyz({0, 0, 0}), 2), ValidationError);
}

TEST_CASE("knn: tie broken by index") {
  auto cloud = PointCloud::from_xyz({0, 0, 0, 1, 0, 0, 0, 1, 0, 3, 0, 0});
  const std::vector<std::size_t> center{0};
  CHECK(knn(cloud, center, 2) == std::vector<std::size_t>{0, 1});
  CHECK(knn(cloud, center, 1) == std::vector<std::size_t>{0});
}

TEST_CASE("knn: matches the exhaustive sort") {
  Rng rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 1 + rng.below(40);
    const std::size_t k = 1 + rng.below(n);
    auto xyz = random_xyz(rng, n);
    std::vector<std::size_t> centers{rng.below(n), rng.below(n)};
    const auto got = knn(PointCloud::from_xyz(xyz), centers, k);
    for (std::size_t c = 0; c < centers.size(); ++c) {
      const auto want = oracle::knn(xyz, centers[c], k);
      CHECK(std::equal(want.begin(), want.end(), got.begin() + static_cast<std::ptrdiff_t>(c * k)));
    }
  }
}

TEST_CASE("ball_query: tiny radius pads with the center") {
  auto cloud = PointCloud::from_xyz({0, 0, 0, 1, 0, 0, 0, 1, 0});
  const std::vector<std::size_t> center{1};
  auto g = ball_query(cloud, center, 1e-3, 4);
  CHECK(g.neighbors == std::vector<std::size_t>{1, 1, 1, 1});
  CHECK(g.pad_mask == PadMask{0, 1, 1, 1});
}

TEST_CASE("ball_query: infinite radius takes the first k indices") {
  Rng rng(4);
  auto cloud = PointCloud::from_xyz(random_xyz(rng, 10));
  const std::vector<std::size_t> center{7};
  auto g = ball_query(cloud, center, std::numeric_limits<double>::infinity(), 4);
  CHECK(g.neighbors == std::vector<std::size_t>{0, 1, 2, 3});
  CHECK(g.pad_mask == PadMask{0, 0, 0, 0});
}

TEST_CASE("ball_query: matches a brute-force radius filter") {
  Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 1 + rng.below(40);
    const std::size_t k = 1 + rng.below(10);
    const double radius = rng.uniform(0.05, 1.5);
    auto xyz = random_xyz(rng, n);
    const std::vector<std::size_t> centers{rng.below(n)};
    const auto g = ball_query(PointCloud::from_xyz(xyz), centers, radius, k);
    const auto inside = oracle::ball(xyz, centers[0], radius);
    const std::size_t live = std::min(k, inside.size());
    for (std::size_t j = 0; j < k; ++j) {
      if (j < live) {
        CHECK(g.neighbor(0, j) == inside[j]);
        CHECK_FALSE(g.is_pad(0, j));
      } else {
        CHECK(g.neighbor(0, j) == inside[0]);
        CHECK(g.is_pad(0, j));
      }
    }
  }
}

TEST_CASE("point cloud validation") {
  CHECK_THROWS_AS(PointCloud::from_xyz({1, 2}), Error);
  CHECK_THROWS_AS(PointCloud::from_xyz({0, 0, std::numeric_limits<double>::quiet_NaN()}).validate(), ValidationError);
}
