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

#include <cstdlib>
#include <map>
#include <sstream>

#include "fixtures.hpp"
#include "papool/cli.hpp"
#include "papool/data.hpp"
#include "temp_dir.hpp"

using namespace papool;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct CliRun {
  int code = -1;
  std::string out;
  std::string err;
};

CliRun run(std::vector<std::string> args) {
  args.insert(args.begin(), "papool");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  CliRun r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), root).generic_string()] = slurp(e.path());
  }
  return files;
}

std::vector<std::string> data_lines(const std::string& text) {
  std::istringstream is(text);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line[0] != '#') out.push_back(line);
  }
  return out;
}

// Dataset + small config shared by the CLI tests.
struct Workspace {
  TempDir dir{"cli"};
  fs::path data = dir / "data";
  fs::path config = dir / "config.json";
  Workspace() {
    const auto g = small_generate_options();
    const auto r = run({"gen-data", "--out", data.string(), "--train-per-class", std::to_string(g.train_per_class),
                        "--test-per-class", std::to_string(g.test_per_class), "--points", std::to_string(g.points),
                        "--seed", "1"});
    REQUIRE(r.code == 0);
    spit(config, to_json(small_run_config(3)).dump(2));
  }
};

Workspace& workspace() {
  static Workspace w;
  return w;
}

}  // namespace

TEST_CASE("cli: usage errors exit 2, help exits 0") {
  CHECK(run({}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({"gradcheck", "--no-such-flag"}).code == 2);
  CHECK(run({"--help"}).code == 0);
  const auto v = run({"--version"});
  CHECK(v.code == 0);
  CHECK(v.out.find(std::string(kToolVersion)) != std::string::npos);
}

TEST_CASE("cli gen-data: counts, byte-identical reruns, bad output directory") {
  TempDir dir("gen");
  const auto a = dir / "a";
  const auto b = dir / "b";
  const std::vector<std::string> common{"--train-per-class", "5", "--test-per-class", "2", "--points", "16"};
  auto args = [&](const fs::path& out, const std::string& seed) {
    std::vector<std::string> v{"gen-data", "--out", out.string(), "--seed", seed};
    v.insert(v.end(), common.begin(), common.end());
    return v;
  };
  REQUIRE(run(args(a, "7")).code == 0);
  REQUIRE(run(args(b, "7")).code == 0);
  CHECK(tree(a) == tree(b));
  const auto m = read_manifest(a / std::string(kManifestName));
  CHECK(m.classes.size() == 4);
  std::map<std::string, std::size_t> splits;
  for (const auto& s : m.samples) splits[s.split]++;
  CHECK(splits["train"] == 20);
  CHECK(splits["test"] == 8);
  const auto gen = json::parse(slurp(a / "generation.json"));
  CHECK(gen.at("tool") == std::string(kToolVersion));
  CHECK(gen.contains("config_digest"));
  CHECK_FALSE(fs::exists(a / ".papool.lock"));

  spit(dir / "plain_file", "x");
  const auto bad = run(args(dir / "plain_file" / "sub", "7"));
  CHECK(bad.code == 2);
  CHECK_FALSE(bad.err.empty());

  // A held lock refuses a second writer.
  fs::create_directories(dir / "locked");
  spit(dir / "locked" / ".papool.lock", "");
  CHECK(run(args(dir / "locked", "7")).code == 2);
}

TEST_CASE("cli gen-data: PAPOOL_SEED supplies the default seed") {
  TempDir dir("envseed");
  const std::vector<std::string> common{"--train-per-class", "2", "--test-per-class", "1", "--points", "16"};
  auto with = [&](std::vector<std::string> v) {
    v.insert(v.end(), common.begin(), common.end());
    return v;
  };
  ::setenv("PAPOOL_SEED", "42", 1);
  REQUIRE(run(with({"gen-data", "--out", (dir / "env").string()})).code == 0);
  ::unsetenv("PAPOOL_SEED");
  REQUIRE(run(with({"gen-data", "--out", (dir / "flag").string(), "--seed", "42"})).code == 0);
  REQUIRE(run(with({"gen-data", "--out", (dir / "zero").string()})).code == 0);
  const auto env = tree(dir / "env");
  auto flag = tree(dir / "flag");
  CHECK(env.at("sphere/sphere_00000.xyz") == flag.at("sphere/sphere_00000.xyz"));
  CHECK(env.at("sphere/sphere_00000.xyz") != tree(dir / "zero").at("sphere/sphere_00000.xyz"));
}

TEST_CASE("cli train/eval: artifacts, resume and evaluation") {
  auto& w = workspace();
  const auto full = w.dir / "full";
  const auto half = w.dir / "half";
  const std::vector<std::string> base{"train", "--config", w.config.string(), "--data", w.data.string()};
  auto train = [&](const fs::path& out, std::vector<std::string> extra) {
    auto v = base;
    v.insert(v.end(), {"--out", out.string()});
    v.insert(v.end(), extra.begin(), extra.end());
    return run(v);
  };

  REQUIRE(train(full, {}).code == 0);
  std::istringstream log(slurp(full / "metrics.jsonl"));
  std::string line;
  std::size_t epochs = 0;
  while (std::getline(log, line)) {
    const auto j = json::parse(line);
    for (const char* key : {"epoch", "train_loss", "train_acc", "test_acc"}) CHECK(j.contains(key));
    ++epochs;
  }
  CHECK(epochs == 3);
  const auto final_full = json::parse(slurp(full / "final_metrics.json"));
  CHECK(final_full.at("tool") == std::string(kToolVersion));

  REQUIRE(train(half, {"--stop-after", "1"}).code == 0);
  REQUIRE(run({"train", "--resume", (half / "checkpoint.papk").string(), "--data", w.data.string(), "--out",
               half.string()})
              .code == 0);
  const auto final_half = json::parse(slurp(half / "final_metrics.json"));
  CHECK(final_half.at("final") == final_full.at("final"));
  CHECK(final_half.at("test") == final_full.at("test"));
  CHECK(slurp(half / "metrics.jsonl") == slurp(full / "metrics.jsonl"));

  const auto ev = run({"eval", "--checkpoint", (full / "checkpoint.papk").string(), "--data", w.data.string()});
  REQUIRE(ev.code == 0);
  const auto metrics = json::parse(ev.out);
  CHECK(metrics.at("accuracy") == metrics.at("recorded_test_accuracy"));
  CHECK(metrics.at("per_class_accuracy").size() == 4);
  CHECK(metrics.at("confusion_matrix").size() == 4);
  CHECK(metrics.at("config_digest") == final_full.at("config_digest"));

  CHECK(run({"eval", "--checkpoint", (w.dir / "missing.papk").string(), "--data", w.data.string()}).code == 2);
  spit(w.dir / "garbage.papk", "not a checkpoint");
  CHECK(run({"eval", "--checkpoint", (w.dir / "garbage.papk").string(), "--data", w.data.string()}).code == 2);
}

TEST_CASE("cli train: pooling switch, flag precedence and bad configs") {
  auto& w = workspace();
  const auto out = w.dir / "maxpool";
  REQUIRE(run({"train", "--config", w.config.string(), "--data", w.data.string(), "--out", out.string(), "--pooling",
               "max", "--epochs", "1"})
              .code == 0);
  const auto cfg = json::parse(slurp(out / "config.json"));
  CHECK(cfg.at("model").at("pooling") == "max");
  CHECK(cfg.at("optimizer").at("epochs") == 1);

  spit(w.dir / "bad.json", R"({"optimizer": {"epochz": 3}})");
  CHECK(run({"train", "--config", (w.dir / "bad.json").string(), "--data", w.data.string(), "--out",
             (w.dir / "bad").string()})
            .code == 2);
  spit(w.dir / "broken.json", "{");
  CHECK(run({"train", "--config", (w.dir / "broken.json").string(), "--data", w.data.string(), "--out",
             (w.dir / "bad").string()})
            .code == 2);
  CHECK(run({"train", "--data", (w.dir / "nowhere").string(), "--out", (w.dir / "bad").string()}).code == 2);
}

TEST_CASE("cli gradcheck") {
  const auto one = run({"gradcheck", "--op", "papool", "--seeds", "3"});
  CHECK(one.code == 0);
  const auto j = json::parse(one.out);
  REQUIRE(j.at("ops").size() == 1);
  CHECK(j.at("ops")[0].at("op") == "papool");
  CHECK(j.at("ops")[0].at("max_rel_error").get<double>() < 1e-4);
  CHECK(run({"gradcheck", "--op", "nope"}).code == 2);
}

TEST_CASE("cli ablate: row structure") {
  auto& w = workspace();
  const auto norm = run({"ablate", "--config", w.config.string(), "--data", w.data.string(), "--axis",
                         "normalization", "--epochs", "1", "--out", (w.dir / "ab.json").string()});
  REQUIRE(norm.code == 0);
  const auto j = json::parse(slurp(w.dir / "ab.json"));
  CHECK(j.at("rows").size() == 6);
  CHECK(j.contains("config_digest"));
  const auto enc = run({"ablate", "--config", w.config.string(), "--data", w.data.string(), "--axis", "encoders",
                        "--range", "1..3", "--epochs", "1", "--format", "csv", "--out", (w.dir / "ab.csv").string()});
  REQUIRE(enc.code == 0);
  CHECK(data_lines(slurp(w.dir / "ab.csv")).size() == 1 + 3);
  CHECK(run({"ablate", "--config", w.config.string(), "--data", w.data.string(), "--range", "x..y"}).code == 2);
}

TEST_CASE("cli inspect-weights: visualization shape and normalization") {
  auto& w = workspace();
  const auto out = w.dir / "insp";
  REQUIRE(run({"train", "--config", w.config.string(), "--data", w.data.string(), "--out", out.string(), "--epochs",
               "1"})
              .code == 0);
  auto sample = generate_shape(ShapeKind::torus, 100, 3, 0.01);
  sample.id = "probe";
  write_xyz(sample, w.dir / "probe.xyz");
  const auto ckpt = (out / "checkpoint.papk").string();
  const auto r = run({"inspect-weights", "--checkpoint", ckpt, "--cloud", (w.dir / "probe.xyz").string(), "--region",
                      "3", "--k", "64", "--channels", "0,1,2,3,4,5,6,7,8"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find(std::string(kToolVersion)) != std::string::npos);
  const auto rows = data_lines(r.out);
  REQUIRE(rows.size() == 1 + 576);
  CHECK(rows[0] == "region,slot,channel,weight,is_pad");
  std::vector<double> sums(9, 0.0);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    std::istringstream f(rows[i]);
    std::string region, slot, channel, weight;
    std::getline(f, region, ',');
    std::getline(f, slot, ',');
    std::getline(f, channel, ',');
    std::getline(f, weight, ',');
    sums[std::stoul(channel)] += std::stod(weight);
  }
  for (double s : sums) CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(run({"inspect-weights", "--checkpoint", ckpt, "--cloud", (w.dir / "probe.xyz").string(), "--region", "999"})
            .code == 2);
  spit(w.dir / "bad.xyz", "1 2 x\n");
  CHECK(run({"inspect-weights", "--checkpoint", ckpt, "--cloud", (w.dir / "bad.xyz").string()}).code == 2);
}

TEST_CASE("cli bench: csv and json agree, digest embedded") {
  TempDir dir("bench");
  const std::vector<std::string> grid{"bench", "--np", "8", "--k", "4", "--c", "4,8", "--seed", "3"};
  auto with = [&](std::vector<std::string> extra) {
    auto v = grid;
    v.insert(v.end(), extra.begin(), extra.end());
    return run(v);
  };
  REQUIRE(with({"--format", "json", "--out", (dir / "b.json").string()}).code == 0);
  REQUIRE(with({"--format", "csv", "--out", (dir / "b.csv").string()}).code == 0);
  const auto j = json::parse(slurp(dir / "b.json"));
  CHECK(j.at("cases").size() == 6);
  CHECK(j.at("config_digest").get<std::string>().size() == 16);
  const auto csv_text = slurp(dir / "b.csv");
  CHECK(csv_text.find(j.at("config_digest").get<std::string>()) != std::string::npos);
  const auto rows = data_lines(csv_text);
  REQUIRE(rows.size() == 7);
  for (std::size_t i = 0; i < 6; ++i) {
    const auto& c = j.at("cases")[i];
    CHECK(rows[i + 1].rfind(c.at("operator").get<std::string>() + ",", 0) == 0);
  }
  CHECK(with({"--repeats", "3"}).code == 2);
  CHECK(with({"--format", "yaml"}).code == 2);
}
