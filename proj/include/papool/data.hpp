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

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "papool/geometry.hpp"

namespace papool {

enum class ShapeKind { sphere, cube, cylinder, torus };

inline constexpr std::array<ShapeKind, 4> kShapeKinds{ShapeKind::sphere, ShapeKind::cube, ShapeKind::cylinder,
                                                      ShapeKind::torus};
// Torus radii (tube center line, tube).
inline constexpr double kTorusMajor = 1.0;
inline constexpr double kTorusMinor = 0.4;

std::string_view to_string(ShapeKind kind);
ShapeKind parse_shape_kind(std::string_view s);

struct Sample {
  PointCloud cloud;
  std::size_t label = 0;
  std::string id;
};

/// Uniform surface samples of a unit-scale analytic shape plus Gaussian
/// jitter. Sphere: radius 1. Cube: [-1, 1]^3. Cylinder: radius 1, z in
/// [-1, 1], caps included. Torus: radii kTorusMajor / kTorusMinor around z.
Sample generate_shape(ShapeKind kind, std::size_t n_points, std::uint64_t seed, double noise_sigma);

/// Centroid to the origin, farthest point to radius 1.
PointCloud normalize_unit_sphere(const PointCloud& cloud);

struct AugmentOptions {
  bool rotate_z = false;
  double jitter_sigma = 0.0;
  double scale_min = 1.0;
  double scale_max = 1.0;
};

/// Random z rotation, then per-point jitter, then a global scale.
PointCloud augment(const PointCloud& cloud, std::uint64_t seed, const AugmentOptions& options);

/// Text format: optional `# key: value` header lines (id, label, class), then
/// one `x y z` row per point with 6 decimals.
void write_xyz(const Sample& sample, const std::filesystem::path& path, std::string_view class_name = {});
Sample read_xyz(const std::filesystem::path& path);

struct ManifestEntry {
  std::string id;
  std::string path;  // relative to the manifest directory
  std::size_t label = 0;
  std::string split;  // "train" or "test"
  std::size_t points = 0;
};

struct Manifest {
  int version = 1;
  std::vector<std::string> classes;
  std::vector<ManifestEntry> samples;
};

inline constexpr std::string_view kManifestName = "manifest.json";

std::string manifest_to_json(const Manifest& manifest);
Manifest manifest_from_json(std::string_view text);
Manifest read_manifest(const std::filesystem::path& path);

/// Scans `dir` for .xyz files and writes `dir/manifest.json` with a
/// stratified split: per class, round(ratio * n) samples go to train.
Manifest build_manifest(const std::filesystem::path& dir, double split_ratio, std::uint64_t seed);

struct GenerateOptions {
  std::size_t classes = 4;
  std::size_t train_per_class = 500;
  std::size_t test_per_class = 100;
  std::size_t points = 256;
  double noise_sigma = 0.01;
  std::uint64_t seed = 0;
};

/// Writes `<dir>/<class>/<id>.xyz` for every sample plus the manifest.
Manifest generate_dataset(const std::filesystem::path& dir, const GenerateOptions& options);

struct Dataset {
  std::vector<std::string> classes;
  std::vector<Sample> samples;
};

/// Loads one split ("train", "test" or "all"), normalizing each cloud to the unit sphere.
Dataset load_split(const std::filesystem::path& manifest_path, std::string_view split);

}  // namespace papool
