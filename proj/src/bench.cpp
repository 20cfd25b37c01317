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

#include "papool/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <thread>

#include <sys/utsname.h>

#include <json.hpp>

#include "papool/config.hpp"
#include "papool/errors.hpp"
#include "papool/pooling.hpp"

namespace papool {

namespace {

using Clock = std::chrono::steady_clock;

// Nearest-rank percentile of sorted values.
double percentile(const std::vector<double>& sorted, double q) {
  const auto n = sorted.size();
  auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n)));
  rank = std::clamp<std::size_t>(rank, 1, n);
  return sorted[rank - 1];
}

double median(const std::vector<double>& sorted) {
  const auto n = sorted.size();
  return n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
}

template <typename Fn>
std::vector<double> time_op(Fn&& fn, std::size_t repeats, std::size_t warmup, std::size_t regions) {
  for (std::size_t i = 0; i < warmup; ++i) fn();
  std::vector<double> samples;
  samples.reserve(repeats);
  for (std::size_t i = 0; i < repeats; ++i) {
    const auto t0 = Clock::now();
    fn();
    const auto t1 = Clock::now();
    const double ns = static_cast<double>(std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count());
    samples.push_back(std::max(ns, 1.0) / static_cast<double>(regions));
  }
  std::sort(samples.begin(), samples.end());
  return samples;
}

Tensor random_tensor(Shape shape, Rng& rng) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return Tensor::from(std::move(shape), std::move(v));
}

}  // namespace

ReportFormat parse_report_format(std::string_view s) {
  if (s == "json") return ReportFormat::json;
  if (s == "csv") return ReportFormat::csv;
  if (s == "table") return ReportFormat::table;
  throw ValidationError("unknown report format '" + std::string(s) + "'");
}

std::vector<BenchCase> default_grid() {
  std::vector<BenchCase> grid;
  for (std::size_t n_p : {64, 256}) {
    for (std::size_t k : {16, 64}) {
      for (std::size_t c : {64, 128}) grid.push_back({n_p, k, c});
    }
  }
  return grid;
}

std::string machine_descriptor() {
  std::ostringstream os;
  utsname info{};
  if (uname(&info) == 0) {
    os << info.sysname << ' ' << info.release << ' ' << info.machine;
  } else {
    os << "unknown-os";
  }
  os << ", " << std::thread::hardware_concurrency() << " hw threads";
#if defined(__clang__)
  os << ", clang " << __clang_major__ << '.' << __clang_minor__;
#elif defined(__GNUC__)
  os << ", gcc " << __GNUC__ << '.' << __GNUC_MINOR__;
#endif
  return os.str();
}

BenchReport run_bench(std::span<const BenchCase> grid, std::size_t repeats, std::size_t warmup, std::uint64_t seed) {
  if (repeats < 30) throw ValidationError("benchmark needs at least 30 repeats");
  if (warmup < 5) throw ValidationError("benchmark needs at least 5 warmup runs");
  NoGradGuard no_grad;
  BenchReport report;
  report.machine = machine_descriptor();
  for (std::size_t ci = 0; ci < grid.size(); ++ci) {
    const auto& bc = grid[ci];
    if (bc.n_p == 0 || bc.k == 0 || bc.c == 0) throw ValidationError("benchmark shapes must be positive");
    Rng rng(derive_seed(seed, "bench", ci));
    const Tensor features = random_tensor({bc.n_p, bc.k, bc.c}, rng);
    const Tensor centers = random_tensor({bc.n_p, 3}, rng);
    const Tensor neighbors = random_tensor({bc.n_p, bc.k, 3}, rng);
    PAPoolConfig pc;
    pc.channels = bc.c;
    const auto params = PAPoolParams::init(pc, rng);

    std::vector<std::pair<std::string, std::vector<double>>> timings;
    timings.emplace_back("max_pool", time_op([&] { return max_pool(features); }, repeats, warmup, bc.n_p));
    timings.emplace_back("avg_pool", time_op([&] { return avg_pool(features); }, repeats, warmup, bc.n_p));
    timings.emplace_back("papool",
                         time_op([&] { return papool(centers, neighbors, features, params); }, repeats, warmup, bc.n_p));

    const double base = median(timings.front().second);
    for (const auto& [op, t] : timings) {
      const double med = median(t);
      report.cases.push_back({op, bc.n_p, bc.k, bc.c, repeats, med, percentile(t, 0.10), percentile(t, 0.90), med / base});
    }
  }
  return report;
}

std::string emit_report(const BenchReport& report, ReportFormat format) {
  std::ostringstream os;
  switch (format) {
    case ReportFormat::json: {
      nlohmann::json j;
      j["version"] = report.version;
      j["machine"] = report.machine;
      j["tool"] = kToolVersion;
      j["config_digest"] = report.config_digest;
      j["cases"] = nlohmann::json::array();
      for (const auto& r : report.cases) {
        j["cases"].push_back({{"operator", r.op},
                              {"n_p", r.n_p},
                              {"k", r.k},
                              {"c", r.c},
                              {"repeats", r.repeats},
                              {"median_ns_per_region", r.median_ns_per_region},
                              {"p10", r.p10},
                              {"p90", r.p90},
                              {"overhead_vs_max", r.overhead_vs_max}});
      }
      os << j.dump(2) << '\n';
      break;
    }
    case ReportFormat::csv: {
      if (!report.config_digest.empty()) os << "# " << kToolVersion << " config_digest=" << report.config_digest << '\n';
      os << "operator,n_p,k,c,repeats,median_ns_per_region,p10,p90,overhead_vs_max\n";
      char buf[256];
      for (const auto& r : report.cases) {
        std::snprintf(buf, sizeof(buf), "%s,%zu,%zu,%zu,%zu,%.17g,%.17g,%.17g,%.17g\n", r.op.c_str(), r.n_p, r.k, r.c,
                      r.repeats, r.median_ns_per_region, r.p10, r.p90, r.overhead_vs_max);
        os << buf;
      }
      break;
    }
    case ReportFormat::table: {
      os << "# " << report.machine << '\n';
      if (!report.config_digest.empty()) os << "# config " << report.config_digest << '\n';
      char buf[256];
      std::snprintf(buf, sizeof(buf), "%-9s %5s %4s %5s %14s %12s %12s %9s\n", "operator", "n_p", "k", "c", "median ns/rgn",
                    "p10", "p90", "overhead");
      os << buf;
      for (const auto& r : report.cases) {
        std::snprintf(buf, sizeof(buf), "%-9s %5zu %4zu %5zu %14.1f %12.1f %12.1f %8.2fx\n", r.op.c_str(), r.n_p, r.k,
                      r.c, r.median_ns_per_region, r.p10, r.p90, r.overhead_vs_max);
        os << buf;
      }
      break;
    }
  }
  return os.str();
}

BenchReport report_from_json(std::string_view text) {
  BenchReport report;
  try {
    const auto j = nlohmann::json::parse(text);
    report.version = j.at("version").get<int>();
    report.machine = j.at("machine").get<std::string>();
    report.config_digest = j.value("config_digest", std::string{});
    for (const auto& c : j.at("cases")) {
      report.cases.push_back({c.at("operator").get<std::string>(), c.at("n_p").get<std::size_t>(),
                              c.at("k").get<std::size_t>(), c.at("c").get<std::size_t>(),
                              c.value("repeats", std::size_t{0}), c.at("median_ns_per_region").get<double>(),
                              c.at("p10").get<double>(), c.at("p90").get<double>(),
                              c.at("overhead_vs_max").get<double>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed bench report: ") + e.what(), 0);
  }
  return report;
}

}  // namespace papool
