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
#include <string>
#include <string_view>
#include <vector>

namespace papool {

struct BenchCase {
  std::size_t n_p = 0;
  std::size_t k = 0;
  std::size_t c = 0;
};

struct BenchRecord {
  std::string op;
  std::size_t n_p = 0;
  std::size_t k = 0;
  std::size_t c = 0;
  std::size_t repeats = 0;
  double median_ns_per_region = 0.0;
  double p10 = 0.0;
  double p90 = 0.0;
  double overhead_vs_max = 0.0;
};

struct BenchReport {
  int version = 1;
  std::string machine;
  std::string config_digest;
  std::vector<BenchRecord> cases;
};

enum class ReportFormat { json, csv, table };
ReportFormat parse_report_format(std::string_view s);

/// N_p in {64, 256} x K in {16, 64} x C in {64, 128}.
std::vector<BenchCase> default_grid();

/// "<os> <arch>, <n> hw threads, <compiler>"
std::string machine_descriptor();

/// Forward-only timings of max_pool, avg_pool and papool on identical seeded
/// inputs per case. Requires repeats >= 30 and warmup >= 5.
BenchReport run_bench(std::span<const BenchCase> grid, std::size_t repeats = 30, std::size_t warmup = 5,
                      std::uint64_t seed = 0);

std::string emit_report(const BenchReport& report, ReportFormat format);
BenchReport report_from_json(std::string_view text);

}  // namespace papool
