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

#include "papool/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "papool/errors.hpp"
#include "papool/rng.hpp"

namespace papool {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr double kPi = std::numbers::pi;

void sample_surface(ShapeKind kind, Rng& rng, double* p) {
  switch (kind) {
    case ShapeKind::sphere: {
      double x, y, z, len;
      do {
        x = rng.normal();
        y = rng.normal();
        z = rng.normal();
        len = std::sqrt(x * x + y * y + z * z);
      } while (len < 1e-12);
      p[0] = x / len;
      p[1] = y / len;
      p[2] = z / len;
      return;
    }
    case ShapeKind::cube: {
      const auto face = rng.below(6);
      const auto axis = face / 2;
      p[axis] = face % 2 ? 1.0 : -1.0;
      p[(axis + 1) % 3] = rng.uniform(-1.0, 1.0);
      p[(axis + 2) % 3] = rng.uniform(-1.0, 1.0);
      return;
    }
    case ShapeKind::cylinder: {
      // Side area 4*pi, caps 2*pi in total.
      const double theta = rng.uniform(0.0, 2.0 * kPi);
      if (rng.uniform() < 2.0 / 3.0) {
        p[0] = std::cos(theta);
        p[1] = std::sin(theta);
        p[2] = rng.uniform(-1.0, 1.0);
      } else {
        const double r = std::sqrt(rng.uniform());
        p[0] = r * std::cos(theta);
        p[1] = r * std::sin(theta);
        p[2] = rng.uniform() < 0.5 ? -1.0 : 1.0;
      }
      return;
    }
    case ShapeKind::torus: {
      // The area element is proportional to (R + r cos phi); sample it by rejection.
      double theta, phi;
      do {
        theta = rng.uniform(0.0, 2.0 * kPi);
        phi = rng.uniform(0.0, 2.0 * kPi);
      } while (rng.uniform() * (kTorusMajor + kTorusMinor) > kTorusMajor + kTorusMinor * std::cos(phi));
      const double ring = kTorusMajor + kTorusMinor * std::cos(phi);
      p[0] = ring * std::cos(theta);
      p[1] = ring * std::sin(theta);
      p[2] = kTorusMinor * std::sin(phi);
      return;
    }
  }
}

std::string format_id(ShapeKind kind, std::size_t index) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%05zu", std::string(to_string(kind)).c_str(), index);
  return buf;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

struct XyzHeader {
  std::string id;
  std::string class_name;
  std::size_t label = 0;
};

}  // namespace

std::string_view to_string(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::sphere: return "sphere";
    case ShapeKind::cube: return "cube";
    case ShapeKind::cylinder: return "cylinder";
    case ShapeKind::torus: return "torus";
  }
  return "?";
}

ShapeKind parse_shape_kind(std::string_view s) {
  for (auto k : kShapeKinds) {
    if (s == to_string(k)) return k;
  }
  throw ValidationError("unknown shape '" + std::string(s) + "'");
}

Sample generate_shape(ShapeKind kind, std::size_t n_points, std::uint64_t seed, double noise_sigma) {
  if (n_points < 8) throw ValidationError("a shape needs at least 8 points");
  if (noise_sigma < 0.0) throw ValidationError("noise sigma must be non-negative");
  Rng rng(seed);
  std::vector<double> xyz(3 * n_points);
  for (std::size_t i = 0; i < n_points; ++i) {
    double* p = xyz.data() + 3 * i;
    sample_surface(kind, rng, p);
    if (noise_sigma > 0.0) {
      for (int a = 0; a < 3; ++a) p[a] += noise_sigma * rng.normal();
    }
  }
  Sample s;
  s.cloud = PointCloud::from_xyz(std::move(xyz));
  s.label = static_cast<std::size_t>(kind);
  s.id = std::string(to_string(kind));
  return s;
}

PointCloud normalize_unit_sphere(const PointCloud& cloud) {
  cloud.validate();
  const auto n = cloud.size();
  std::vector<double> xyz = cloud.points.to_vector();
  double centroid[3] = {0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < n; ++i) {
    for (int a = 0; a < 3; ++a) centroid[a] += xyz[3 * i + a];
  }
  for (auto& c : centroid) c /= static_cast<double>(n);
  double radius = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double r2 = 0.0;
    for (int a = 0; a < 3; ++a) {
      xyz[3 * i + a] -= centroid[a];
      r2 += xyz[3 * i + a] * xyz[3 * i + a];
    }
    radius = std::max(radius, std::sqrt(r2));
  }
  if (radius > 0.0) {
    for (auto& v : xyz) v /= radius;
  }
  return PointCloud{Tensor::from({n, 3}, std::move(xyz)), cloud.features};
}

PointCloud augment(const PointCloud& cloud, std::uint64_t seed, const AugmentOptions& options) {
  if (options.scale_min <= 0.0 || options.scale_max < options.scale_min) {
    throw ValidationError("augment scale range must satisfy 0 < min <= max");
  }
  Rng rng(seed);
  std::vector<double> xyz = cloud.points.to_vector();
  const auto n = cloud.size();
  if (options.rotate_z) {
    const double angle = rng.uniform(0.0, 2.0 * kPi);
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    for (std::size_t i = 0; i < n; ++i) {
      const double x = xyz[3 * i];
      const double y = xyz[3 * i + 1];
      xyz[3 * i] = c * x - s * y;
      xyz[3 * i + 1] = s * x + c * y;
    }
  }
  if (options.jitter_sigma > 0.0) {
    for (auto& v : xyz) v += options.jitter_sigma * rng.normal();
  }
  if (options.scale_max != 1.0 || options.scale_min != 1.0) {
    const double factor = rng.uniform(options.scale_min, options.scale_max);
    for (auto& v : xyz) v *= factor;
  }
  return PointCloud{Tensor::from({n, 3}, std::move(xyz)), cloud.features};
}

void write_xyz(const Sample& sample, const fs::path& path, std::string_view class_name) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ValidationError("cannot open '" + path.string() + "' for writing");
  os << "# id: " << sample.id << '\n' << "# label: " << sample.label << '\n';
  if (!class_name.empty()) os << "# class: " << class_name << '\n';
  auto xyz = sample.cloud.points.data();
  char buf[128];
  for (std::size_t i = 0; i < sample.cloud.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.6f %.6f %.6f\n", xyz[3 * i], xyz[3 * i + 1], xyz[3 * i + 2]);
    os << buf;
  }
  if (!os) throw ValidationError("failed writing '" + path.string() + "'");
}

namespace {

Sample parse_xyz(std::istream& is, const std::string& fallback_id, XyzHeader* header_out) {
  XyzHeader header;
  header.id = fallback_id;
  std::vector<double> xyz;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto text = trim(line);
    if (text.empty()) continue;
    if (text[0] == '#') {
      const auto colon = text.find(':');
      if (colon == std::string::npos) continue;
      const auto key = trim(std::string_view(text).substr(1, colon - 1));
      const auto value = trim(std::string_view(text).substr(colon + 1));
      if (key == "id") {
        header.id = value;
      } else if (key == "class") {
        header.class_name = value;
      } else if (key == "label") {
        std::size_t label = 0;
        auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), label);
        if (ec != std::errc() || ptr != value.data() + value.size()) throw ParseError("bad label '" + value + "'", lineno);
        header.label = label;
      }
      continue;
    }
    std::istringstream tokens(text);
    std::string tok;
    int count = 0;
    while (tokens >> tok) {
      if (count == 3) throw ParseError("expected 3 coordinates, found more", lineno);
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(v)) {
        throw ParseError("non-numeric token '" + tok + "'", lineno);
      }
      xyz.push_back(v);
      ++count;
    }
    if (count != 3) throw ParseError("expected 3 coordinates, found " + std::to_string(count), lineno);
  }
  if (xyz.empty()) throw ParseError("no points in input", lineno);
  Sample s;
  s.cloud = PointCloud::from_xyz(std::move(xyz));
  s.label = header.label;
  s.id = header.id;
  if (header_out) *header_out = header;
  return s;
}

Sample read_xyz_with_header(const fs::path& path, XyzHeader* header) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("cannot open '" + path.string() + "'");
  return parse_xyz(is, path.stem().string(), header);
}

}  // namespace

Sample read_xyz(const fs::path& path) { return read_xyz_with_header(path, nullptr); }

std::string manifest_to_json(const Manifest& manifest) {
  json j;
  j["version"] = manifest.version;
  j["classes"] = manifest.classes;
  j["samples"] = json::array();
  for (const auto& s : manifest.samples) {
    j["samples"].push_back({{"id", s.id}, {"path", s.path}, {"label", s.label}, {"split", s.split}, {"points", s.points}});
  }
  return j.dump(2) + "\n";
}

Manifest manifest_from_json(std::string_view text) {
  Manifest m;
  try {
    const auto j = json::parse(text);
    m.version = j.at("version").get<int>();
    if (m.version != 1) throw ValidationError("unsupported manifest version " + std::to_string(m.version));
    m.classes = j.at("classes").get<std::vector<std::string>>();
    for (const auto& s : j.at("samples")) {
      ManifestEntry e;
      e.id = s.at("id").get<std::string>();
      e.path = s.at("path").get<std::string>();
      e.label = s.at("label").get<std::size_t>();
      e.split = s.at("split").get<std::string>();
      e.points = s.value("points", std::size_t{0});
      if (e.label >= m.classes.size()) throw ValidationError("manifest label out of range for sample " + e.id);
      m.samples.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed manifest: ") + e.what(), 0);
  }
  return m;
}

Manifest read_manifest(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("cannot open manifest '" + path.string() + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  return manifest_from_json(ss.str());
}

Manifest build_manifest(const fs::path& dir, double split_ratio, std::uint64_t seed) {
  if (split_ratio < 0.0 || split_ratio > 1.0) throw ValidationError("split ratio must lie in [0, 1]");
  if (!fs::is_directory(dir)) throw ValidationError("'" + dir.string() + "' is not a directory");

  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".xyz") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  Manifest m;
  std::map<std::size_t, std::string> class_names;
  std::map<std::size_t, std::vector<std::size_t>> by_label;
  for (const auto& f : files) {
    XyzHeader header;
    const auto sample = read_xyz_with_header(f, &header);
    ManifestEntry e;
    e.id = sample.id;
    e.path = fs::relative(f, dir).generic_string();
    e.label = sample.label;
    e.points = sample.cloud.size();
    auto& name = class_names[e.label];
    if (name.empty()) name = header.class_name.empty() ? "class_" + std::to_string(e.label) : header.class_name;
    by_label[e.label].push_back(m.samples.size());
    m.samples.push_back(std::move(e));
  }
  const std::size_t n_classes = class_names.empty() ? 0 : class_names.rbegin()->first + 1;
  for (std::size_t c = 0; c < n_classes; ++c) {
    auto it = class_names.find(c);
    m.classes.push_back(it == class_names.end() ? "class_" + std::to_string(c) : it->second);
  }

  for (auto& [label, members] : by_label) {
    std::sort(members.begin(), members.end(),
              [&m](std::size_t a, std::size_t b) { return m.samples[a].id < m.samples[b].id; });
    Rng rng(derive_seed(seed, "split", label));
    shuffle(members.begin(), members.end(), rng);
    const auto n_train = static_cast<std::size_t>(std::llround(split_ratio * static_cast<double>(members.size())));
    for (std::size_t i = 0; i < members.size(); ++i) m.samples[members[i]].split = i < n_train ? "train" : "test";
  }

  std::ofstream os(dir / kManifestName, std::ios::binary);
  if (!os) throw ValidationError("cannot write manifest in '" + dir.string() + "'");
  os << manifest_to_json(m);
  return m;
}

Manifest generate_dataset(const fs::path& dir, const GenerateOptions& options) {
  if (options.classes < 1 || options.classes > kShapeKinds.size()) {
    throw ValidationError("class count must lie in [1, " + std::to_string(kShapeKinds.size()) + "]");
  }
  const auto per_class = options.train_per_class + options.test_per_class;
  if (per_class == 0) throw ValidationError("need at least one sample per class");
  fs::create_directories(dir);
  for (std::size_t c = 0; c < options.classes; ++c) {
    const auto kind = kShapeKinds[c];
    const auto class_dir = dir / std::string(to_string(kind));
    fs::create_directories(class_dir);
    for (std::size_t i = 0; i < per_class; ++i) {
      const auto id = format_id(kind, i);
      auto sample = generate_shape(kind, options.points, derive_seed(options.seed, id), options.noise_sigma);
      sample.id = id;
      write_xyz(sample, class_dir / (id + ".xyz"), to_string(kind));
    }
  }
  const double ratio = static_cast<double>(options.train_per_class) / static_cast<double>(per_class);
  return build_manifest(dir, ratio, options.seed);
}

Dataset load_split(const fs::path& manifest_path, std::string_view split) {
  const auto manifest = read_manifest(manifest_path);
  const auto root = manifest_path.parent_path();
  Dataset d;
  d.classes = manifest.classes;
  for (const auto& e : manifest.samples) {
    if (split != "all" && e.split != split) continue;
    auto sample = read_xyz(root / e.path);
    if (e.points && sample.cloud.size() != e.points) {
      throw ValidationError("sample " + e.id + " has " + std::to_string(sample.cloud.size()) +
                            " points, manifest says " + std::to_string(e.points));
    }
    sample.label = e.label;
    sample.id = e.id;
    sample.cloud = normalize_unit_sphere(sample.cloud);
    d.samples.push_back(std::move(sample));
  }
  return d;
}

}  // namespace papool
