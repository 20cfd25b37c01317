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

#include <sstream>

#include "fixtures.hpp"
#include "papool/bench.hpp"
#include "papool/config.hpp"
#include "papool/errors.hpp"
#include "papool/gradcheck.hpp"
#include "temp_dir.hpp"

using namespace papool;

TEST_CASE("bench: record structure and overhead factors") {
  CHECK(default_grid().size() == 8);
  const std::vector<BenchCase> grid{{8, 4, 6}, {16, 8, 4}};
  const auto report = run_bench(grid, 30, 5, 1);
  CHECK(report.version == 1);
  CHECK_FALSE(report.machine.empty());
  REQUIRE(report.cases.size() == 6);
  for (const auto& r : report.cases) {
    CHECK(r.repeats == 30);
    CHECK(r.median_ns_per_region > 0.0);
    CHECK(r.p10 <= r.median_ns_per_region);
    CHECK(r.median_ns_per_region <= r.p90);
    if (r.op == "max_pool") CHECK(r.overhead_vs_max == 1.0);
    if (r.op == "papool") CHECK(r.overhead_vs_max >= 1.0);
  }
  CHECK_THROWS_AS(run_bench(grid, 10, 5, 1), ValidationError);
  CHECK_THROWS_AS(run_bench(grid, 30, 2, 1), ValidationError);
}

TEST_CASE("bench: report formats agree") {
  const std::vector<BenchCase> grid{{4, 4, 4}};
  auto report = run_bench(grid, 30, 5, 2);
  report.config_digest = "0123456789abcdef";
  const auto json_text = emit_report(report, ReportFormat::json);
  const auto back = report_from_json(json_text);
  REQUIRE(back.cases.size() == report.cases.size());
  for (std::size_t i = 0; i < back.cases.size(); ++i) {
    CHECK(back.cases[i].op == report.cases[i].op);
    CHECK(back.cases[i].median_ns_per_region == report.cases[i].median_ns_per_region);
    CHECK(back.cases[i].overhead_vs_max == report.cases[i].overhead_vs_max);
  }
  CHECK(back.config_digest == report.config_digest);

  std::istringstream csv(emit_report(report, ReportFormat::csv));
  std::string line;
  std::vector<std::string> rows;
  while (std::getline(csv, line)) {
    if (!line.empty() && line[0] != '#') rows.push_back(line);
  }
  REQUIRE(rows.size() == 1 + report.cases.size());
  CHECK(rows[0] == "operator,n_p,k,c,repeats,median_ns_per_region,p10,p90,overhead_vs_max");
  for (std::size_t i = 0; i < report.cases.size(); ++i) {
    const auto& r = report.cases[i];
    std::istringstream fields(rows[i + 1]);
    std::string op;
    std::getline(fields, op, ',');
    CHECK(op == r.op);
    std::string cell;
    for (int skip = 0; skip < 4; ++skip) std::getline(fields, cell, ',');
    std::getline(fields, cell, ',');
    CHECK(std::stod(cell) == r.median_ns_per_region);
  }
  CHECK(emit_report(report, ReportFormat::table) == emit_report(report, ReportFormat::table));
  CHECK(emit_report(report, ReportFormat::table).find(report.config_digest) != std::string::npos);
  CHECK_THROWS_AS(parse_report_format("xml"), ValidationError);
}

TEST_CASE("bench leaves operators usable for gradient checks") {
  const std::vector<BenchCase> grid{{4, 4, 4}};
  run_bench(grid, 30, 5, 3);
  const auto results = run_gradcheck_suite("papool", 3);
  REQUIRE(results.size() == 1);
  CHECK(results[0].passed);
}

TEST_CASE("gradcheck suite: registry and filtering") {
  const auto names = gradcheck_operator_names();
  for (const char* op : {"linear", "relu", "softmax", "reduce_max", "cross_entropy", "papool", "aggregate",
                         "construct_graph", "relative_position", "group"}) {
    CHECK(std::find(names.begin(), names.end(), op) != names.end());
  }
  CHECK_THROWS_AS(run_gradcheck_suite("no_such_op", 1), ValidationError);
}

TEST_CASE("run config: JSON round trip, defaults and unknown keys") {
  const auto cfg = small_run_config(5);
  const auto j = to_json(cfg);
  const auto back = run_config_from_json(j);
  CHECK(to_json(back) == j);
  CHECK(config_digest(back) == config_digest(cfg));
  CHECK(config_digest(cfg).size() == 16);

  auto other = cfg;
  other.optimizer.lr *= 2;
  CHECK(config_digest(other) != config_digest(cfg));

  const auto defaults = run_config_from_json(nlohmann::json::object());
  CHECK(config_digest(defaults) == config_digest(RunConfig{}));
  const auto partial = run_config_from_json(nlohmann::json::parse(R"({"seed": 9, "optimizer": {"epochs": 2}})"));
  CHECK(partial.optimizer.seed == 9);
  CHECK(partial.optimizer.epochs == 2);
  CHECK(partial.optimizer.lr == RunConfig{}.optimizer.lr);

  CHECK_THROWS_AS(run_config_from_json(nlohmann::json::parse(R"({"sed": 1})")), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(nlohmann::json::parse(R"({"optimizer": {"learning_rate": 1}})")), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(nlohmann::json::parse(R"({"papool": {"normalization": "cosine"}})")),
                  ConfigError);

  TempDir dir("config");
  spit(dir / "c.json", j.dump(2));
  CHECK(config_digest(load_run_config(dir / "c.json")) == config_digest(cfg));
}

TEST_CASE("run config validation") {
  auto cfg = RunConfig{};
  cfg.optimizer.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = RunConfig{};
  cfg.model.dropout = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = RunConfig{};
  cfg.model.stages[0].neighbors = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
