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

#include <cmath>
#include <map>

#include "oracles.hpp"
#include "papool/data.hpp"
#include "papool/errors.hpp"
#include "temp_dir.hpp"

using namespace papool;

namespace {

double norm3(std::span<const double> p, std::size_t i) {
  return std::sqrt(p[3 * i] * p[3 * i] + p[3 * i + 1] * p[3 * i + 1] + p[3 * i + 2] * p[3 * i + 2]);
}

}  // namespace

TEST_CASE("shapes: noiseless samples lie on their surfaces") {
  const auto sphere_s = generate_shape(ShapeKind::sphere, 300, 1, 0.0);
  const auto sphere = sphere_s.cloud.points.data();
  for (std::size_t i = 0; i < 300; ++i) CHECK(std::abs(norm3(sphere, i) - 1.0) <= 1e-9);

  const auto cube_s = generate_shape(ShapeKind::cube, 300, 2, 0.0);
  const auto cube = cube_s.cloud.points.data();
  for (std::size_t i = 0; i < 300; ++i) {
    const double m = std::max({std::abs(cube[3 * i]), std::abs(cube[3 * i + 1]), std::abs(cube[3 * i + 2])});
    CHECK(std::abs(m - 1.0) <= 1e-9);
  }

  const auto cyl_s = generate_shape(ShapeKind::cylinder, 300, 3, 0.0);
  const auto cyl = cyl_s.cloud.points.data();
  for (std::size_t i = 0; i < 300; ++i) {
    const double r = std::hypot(cyl[3 * i], cyl[3 * i + 1]);
    const double z = cyl[3 * i + 2];
    const bool side = std::abs(r - 1.0) <= 1e-9 && std::abs(z) <= 1.0 + 1e-9;
    const bool cap = std::abs(std::abs(z) - 1.0) <= 1e-9 && r <= 1.0 + 1e-9;
    CHECK((side || cap));
  }

  const auto torus_s = generate_shape(ShapeKind::torus, 300, 4, 0.0);
  const auto torus = torus_s.cloud.points.data();
  for (std::size_t i = 0; i < 300; ++i) {
    const double ring = std::hypot(torus[3 * i], torus[3 * i + 1]) - kTorusMajor;
    CHECK(std::abs(std::hypot(ring, torus[3 * i + 2]) - kTorusMinor) <= 1e-9);
  }
}

TEST_CASE("shapes: seeded and labelled") {
  const auto a = generate_shape(ShapeKind::torus, 64, 9, 0.01);
  const auto b = generate_shape(ShapeKind::torus, 64, 9, 0.01);
  const auto c = generate_shape(ShapeKind::torus, 64, 10, 0.01);
  CHECK(a.cloud.points.to_vector() == b.cloud.points.to_vector());
  CHECK(a.cloud.points.to_vector() != c.cloud.points.to_vector());
  CHECK(a.label == 3);
  CHECK_THROWS_AS(generate_shape(ShapeKind::cube, 4, 1, 0.0), ValidationError);
}

TEST_CASE("normalize_unit_sphere") {
  Rng rng(1);
  const auto cloud = PointCloud::from_xyz(oracle::random_values(rng, 90, -3, 5));
  const auto once = normalize_unit_sphere(cloud);
  const auto p = once.points.data();
  double top = 0.0;
  double centroid[3] = {0, 0, 0};
  for (std::size_t i = 0; i < 30; ++i) {
    top = std::max(top, norm3(p, i));
    for (int a = 0; a < 3; ++a) centroid[a] += p[3 * i + a] / 30.0;
  }
  CHECK(std::abs(top - 1.0) <= 1e-12);
  for (double v : centroid) CHECK(std::abs(v) <= 1e-12);
  CHECK(oracle::max_abs_diff(normalize_unit_sphere(once).points.to_vector(), once.points.to_vector()) <= 1e-12);

  auto moved = cloud.points.to_vector();
  for (std::size_t i = 0; i < moved.size(); ++i) moved[i] += 10.0 * static_cast<double>(i % 3);
  CHECK(oracle::max_abs_diff(normalize_unit_sphere(PointCloud::from_xyz(moved)).points.to_vector(),
                             once.points.to_vector()) <= 1e-12);
}

TEST_CASE("augment: identity, isometry and determinism") {
  Rng rng(2);
  const auto cloud = PointCloud::from_xyz(oracle::random_values(rng, 60));
  CHECK(augment(cloud, 5, AugmentOptions{}).points.to_vector() == cloud.points.to_vector());

  AugmentOptions rot;
  rot.rotate_z = true;
  const auto turned = augment(cloud, 5, rot);
  CHECK(turned.points.to_vector() != cloud.points.to_vector());
  const auto a = cloud.points.data();
  const auto b = turned.points.data();
  for (std::size_t i = 0; i < 20; ++i) {
    for (std::size_t j = i + 1; j < 20; ++j) {
      const double da = std::sqrt(oracle::sq_dist(cloud.points.to_vector(), i, j));
      const double db = std::sqrt(oracle::sq_dist(turned.points.to_vector(), i, j));
      CHECK(std::abs(da - db) <= 1e-9);
    }
    CHECK(std::abs(a[3 * i + 2] - b[3 * i + 2]) <= 1e-15);
  }

  AugmentOptions all{true, 0.02, 0.8, 1.2};
  CHECK(augment(cloud, 7, all).points.to_vector() == augment(cloud, 7, all).points.to_vector());
  CHECK(augment(cloud, 7, all).points.to_vector() != augment(cloud, 8, all).points.to_vector());
}

TEST_CASE("xyz files: round trip and parse errors") {
  TempDir dir("xyz");
  auto sample = generate_shape(ShapeKind::cylinder, 50, 3, 0.01);
  sample.id = "cyl_1";
  write_xyz(sample, dir / "a.xyz", "cylinder");
  const auto back = read_xyz(dir / "a.xyz");
  CHECK(back.id == "cyl_1");
  CHECK(back.label == 2);
  CHECK(oracle::max_abs_diff(back.cloud.points.to_vector(), sample.cloud.points.to_vector()) <= 1e-6);

  spit(dir / "empty.xyz", "");
  CHECK_THROWS_AS(read_xyz(dir / "empty.xyz"), ParseError);

  spit(dir / "bad.xyz", "# id: x\n0 0 0\n1 two 3\n");
  try {
    read_xyz(dir / "bad.xyz");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  spit(dir / "short.xyz", "0 0\n");
  CHECK_THROWS_AS(read_xyz(dir / "short.xyz"), ParseError);
}

TEST_CASE("manifest: stratified, seeded, byte-stable") {
  TempDir dir("manifest");
  GenerateOptions opts;
  opts.classes = 3;
  opts.train_per_class = 7;
  opts.test_per_class = 3;
  opts.points = 16;
  opts.seed = 4;
  const auto m = generate_dataset(dir.path(), opts);
  CHECK(m.classes == std::vector<std::string>{"sphere", "cube", "cylinder"});
  CHECK(m.samples.size() == 30);
  const auto first = slurp(dir / std::string(kManifestName));

  for (double ratio : {1.0, 0.5, 0.33}) {
    const auto built = build_manifest(dir.path(), ratio, 4);
    std::map<std::size_t, std::size_t> train;
    std::map<std::size_t, std::size_t> total;
    for (const auto& e : built.samples) {
      total[e.label]++;
      if (e.split == "train") train[e.label]++;
    }
    for (const auto& [label, n] : total) {
      const double exact = ratio * static_cast<double>(n);
      CHECK(std::abs(static_cast<double>(train[label]) - exact) <= 1.0);
      if (ratio == 1.0) CHECK(train[label] == n);
    }
  }
  // Same seed and ratio reproduce the original file byte for byte.
  build_manifest(dir.path(), 0.7, 4);
  CHECK(slurp(dir / std::string(kManifestName)) == first);
  CHECK(manifest_to_json(read_manifest(dir / std::string(kManifestName))) == first);

  const auto train = load_split(dir / std::string(kManifestName), "train");
  const auto test = load_split(dir / std::string(kManifestName), "test");
  CHECK(train.samples.size() == 21);
  CHECK(test.samples.size() == 9);
  CHECK_THROWS_AS(manifest_from_json("{\"version\": 1"), ParseError);
}
