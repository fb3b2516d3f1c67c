// Copyright 2026 The Honeypot Authors. All Rights Reserved.
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

#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <regex>
#include <sstream>

#include <nlohmann/json.hpp>

#include "honeypot/commands.hpp"
#include "honeypot/error.hpp"
#include "test_util.hpp"

namespace honeypot {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(f), {});
}

std::size_t line_count(const fs::path& p) {
  std::ifstream f(p);
  std::size_t n = 0;
  std::string line;
  while (std::getline(f, line)) ++n;
  return n;
}

struct Proc {
  int status = 0;
  std::string out;
};

// Runs the CLI binary, capturing stdout and stderr together.
Proc run_cli(const std::string& args) {
  const std::string cmd = std::string(HONEYPOT_CLI_PATH) + " " + args + " 2>&1";
  Proc p;
  FILE* f = popen(cmd.c_str(), "r");
  if (!f) throw IoError("popen failed");
  std::array<char, 512> buf{};
  while (std::fgets(buf.data(), buf.size(), f)) p.out += buf.data();
  const int raw = pclose(f);
  p.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return p;
}

// ---- config ---------------------------------------------------------------

TEST(Config, EmptyMaterializesDefaults) {
  EXPECT_EQ(to_ini(parse_run_config("")), to_ini(default_run_config()));
  const RunConfig c = parse_run_config("");
  EXPECT_EQ(c.defense.q, 0.5);
  EXPECT_EQ(c.defense.c, 0.1);
  EXPECT_EQ(c.defense.window_t, 100u);
  EXPECT_EQ(c.defense.tap_layer, 1u);
  EXPECT_FALSE(c.defense.warmup_steps.has_value());
  EXPECT_EQ(c.poison.poison_rate, 0.05);
  EXPECT_EQ(c.run.replicates, 3u);
  EXPECT_EQ(c.replicate_seeds(), (std::vector<std::uint64_t>{0, 1, 2}));
}

TEST(Config, ParseAndRoundTrip) {
  const RunConfig c = parse_run_config(
      "# comment\n[defense]\nq = 0.7\nwarmup_steps = 4\nsigma_kind = sigmoid\n"
      "honeypot_learning_rate = 1e-4\n[poison]\ntrigger_kind = sentence\n[run]\nseed = 9\n");
  EXPECT_EQ(c.defense.q, 0.7);
  EXPECT_EQ(c.defense.warmup_steps, 4u);
  EXPECT_EQ(c.defense.sigma, SigmaKind::kSigmoid);
  EXPECT_EQ(c.defense.honeypot_learning_rate, 1e-4);
  EXPECT_EQ(c.trigger_text(), "i watched a 3d movie");
  EXPECT_EQ(c.run.seed, 9u);
  EXPECT_EQ(to_ini(parse_run_config(to_ini(c))), to_ini(c));
  EXPECT_EQ(get_field(c, "defense.warmup_steps"), "4");
  EXPECT_EQ(get_field(default_run_config(), "defense.warmup_steps"), "epoch");
  EXPECT_EQ(get_field(default_run_config(), "defense.honeypot_learning_rate"), "auto");
}

TEST(Config, EveryFieldRoundTrips) {
  RunConfig c = default_run_config();
  for (const std::string& key : field_names()) {
    const std::string v = get_field(c, key);
    set_field(c, key, v);
    EXPECT_EQ(get_field(c, key), v) << key;
  }
  EXPECT_EQ(to_ini(c), to_ini(default_run_config()));
}

TEST(Config, Errors) {
  EXPECT_THROW(parse_run_config("[defense]\nqq = 0.5\n"), ConfigError);
  EXPECT_THROW(parse_run_config("q = 0.5\n"), ConfigError);
  EXPECT_THROW(parse_run_config("[defense]\nq = half\n"), ConfigError);
  EXPECT_THROW(parse_run_config("[defense]\nwindow_t = -3\n"), ConfigError);
  EXPECT_THROW(parse_run_config("[nowhere]\nx = 1\n"), ConfigError);
  RunConfig c;
  c.corpus.n = 1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.corpus.source = "tsv";
  c.corpus.train_tsv = "/nonexistent/train.tsv";
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.defense.tap_layer = 9;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Config, CliRejectsUnknownKey) {
  test::TempDir dir("cfg");
  std::ofstream(dir.path() / "bad.ini") << "[defense]\ntypo_key = 1\n";
  const Proc p = run_cli("--config " + (dir.path() / "bad.ini").string() + " --out " +
                         (dir.path() / "out").string() + " datagen");
  EXPECT_NE(p.status, 0);
  EXPECT_NE(p.out.find("typo_key"), std::string::npos) << p.out;
}

// ---- run directories ------------------------------------------------------

TEST(RunDir, OverwriteGuard) {
  test::TempDir dir("guard");
  const fs::path d = dir.path() / "run";
  prepare_run_dir(d, false);
  prepare_run_dir(d, false);  // empty is fine
  std::ofstream(d / "x") << "1";
  EXPECT_THROW(prepare_run_dir(d, false), Error);
  prepare_run_dir(d, true);
  EXPECT_FALSE(fs::exists(d / "x"));
}

class CliRun : public ::testing::Test {
 protected:
  test::TempDir dir{"cli"};
  fs::path config_path = dir.path() / "tiny.ini";
  RunConfig cfg = test::tiny_run_config(200);
  void SetUp() override {
    cfg.run.replicates = 2;
    save_run_config(config_path, cfg);
  }
  GlobalOptions opts(const std::string& sub) const {
    GlobalOptions g;
    g.config = config_path;
    g.out = dir.path() / sub;
    return g;
  }
};

TEST_F(CliRun, DatagenSplitsAndRepeats) {
  const std::string out = (dir.path() / "data").string();
  const Proc a = run_cli("--seed 3 --out " + out + " datagen");
  ASSERT_EQ(a.status, 0) << a.out;
  // Header line plus rows.
  EXPECT_EQ(line_count(dir.path() / "data" / "train.tsv"), 1601u);
  EXPECT_EQ(line_count(dir.path() / "data" / "validation.tsv"), 201u);
  EXPECT_EQ(line_count(dir.path() / "data" / "test.tsv"), 201u);
  const std::string train = slurp(dir.path() / "data" / "train.tsv");
  const Proc again = run_cli("--seed 3 --out " + out + " datagen");
  EXPECT_NE(again.status, 0);
  EXPECT_NE(again.out.find("error:"), std::string::npos);
  ASSERT_EQ(run_cli("--seed 3 --overwrite --out " + out + " datagen").status, 0);
  EXPECT_EQ(slurp(dir.path() / "data" / "train.tsv"), train);
}

TEST_F(CliRun, DatagenRejectsTinyCorpus) {
  std::ofstream(dir.path() / "n1.ini") << "[corpus]\nn = 1\n";
  const Proc p = run_cli("--config " + (dir.path() / "n1.ini").string() + " --out " +
                         (dir.path() / "n1").string() + " datagen");
  EXPECT_NE(p.status, 0);
  EXPECT_NE(p.out.find("error:"), std::string::npos);
}

TEST_F(CliRun, TrainWritesSelfDescribingRunDir) {
  std::ostringstream log;
  ASSERT_EQ(cmd_train(opts("train"), DefenseMode::kHoneypot, log), 0);
  const fs::path run = dir.path() / "train";
  RunConfig expected = cfg;
  expected.run.out_dir = run.string();
  EXPECT_EQ(slurp(run / "config.ini"), to_ini(expected));
  EXPECT_EQ(to_ini(load_run_config(run / "config.ini")), to_ini(expected));
  for (std::uint64_t s : {0u, 1u}) {
    const fs::path r = run / ("seed-" + std::to_string(s));
    for (const char* f : {"manifest.jsonl", "metrics.jsonl", "eval.jsonl", "checkpoint.bin"}) {
      EXPECT_TRUE(fs::exists(r / f)) << r / f;
    }
    // One eval line per epoch plus the final one.
    EXPECT_EQ(line_count(r / "eval.jsonl"), cfg.defense.epochs + 1);
  }
  EXPECT_TRUE(fs::exists(run / "summary.csv"));
  const std::regex line(R"(seed \d+ acc \d\.\d{4} asr \d\.\d{4})");
  std::istringstream in(log.str());
  std::string l;
  std::size_t hits = 0;
  while (std::getline(in, l)) hits += std::regex_search(l, line);
  EXPECT_EQ(hits, 2u) << log.str();
}

// Metrics lines without the wall-clock field.
std::vector<nlohmann::json> metrics_without_clock(const fs::path& p) {
  std::vector<nlohmann::json> out;
  std::ifstream in(p);
  std::string line;
  while (std::getline(in, line)) {
    auto j = nlohmann::json::parse(line);
    j.erase("wall_clock");
    out.push_back(std::move(j));
  }
  return out;
}

TEST_F(CliRun, EndToEndDeterminism) {
  std::ostringstream log;
  ASSERT_EQ(cmd_train(opts("a"), DefenseMode::kHoneypot, log), 0);
  ASSERT_EQ(cmd_train(opts("b"), DefenseMode::kHoneypot, log), 0);
  for (const char* s : {"seed-0", "seed-1"}) {
    const fs::path a = dir.path() / "a" / s, b = dir.path() / "b" / s;
    EXPECT_EQ(slurp(a / "checkpoint.bin"), slurp(b / "checkpoint.bin"));
    EXPECT_EQ(slurp(a / "manifest.jsonl"), slurp(b / "manifest.jsonl"));
    EXPECT_EQ(slurp(a / "eval.jsonl"), slurp(b / "eval.jsonl"));
    const auto ma = metrics_without_clock(a / "metrics.jsonl");
    EXPECT_FALSE(ma.empty());
    EXPECT_EQ(ma, metrics_without_clock(b / "metrics.jsonl"));
  }
}

TEST_F(CliRun, EvalPrintsFourDecimalsAndRepeats) {
  std::ostringstream log;
  ASSERT_EQ(cmd_train(opts("train"), DefenseMode::kNone, log), 0);
  const fs::path ck = dir.path() / "train" / "seed-0" / "checkpoint.bin";
  const std::string args = "--config " + config_path.string() + " eval " + ck.string();
  const Proc a = run_cli(args);
  ASSERT_EQ(a.status, 0) << a.out;
  EXPECT_TRUE(std::regex_search(a.out, std::regex(R"(acc \d\.\d{4} asr \d\.\d{4})"))) << a.out;
  const fs::path report = ck.string() + ".eval.json";
  const std::string first = slurp(report);
  EXPECT_FALSE(first.empty());
  const Proc b = run_cli(args);
  ASSERT_EQ(b.status, 0);
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(slurp(report), first);
}

TEST_F(CliRun, EvalMissingCheckpointFails) {
  const Proc p = run_cli("eval " + (dir.path() / "nope.bin").string());
  EXPECT_NE(p.status, 0);
  EXPECT_NE(p.out.find("error:"), std::string::npos) << p.out;
  EXPECT_NE(p.out.find("nope.bin"), std::string::npos) << p.out;
}

// ---- sweeps ---------------------------------------------------------------

TEST_F(CliRun, SweepMeansMatchReplicates) {
  const SweepResult r = run_sweep(cfg, "q", {"0.3", "0.7"}, DefenseMode::kHoneypot, 1, dir.path() / "sweep");
  ASSERT_EQ(r.cells.size(), 4u);
  ASSERT_EQ(r.summaries.size(), 2u);
  for (std::size_t v = 0; v < 2; ++v) {
    const auto& s = r.summaries[v];
    double acc = 0.0, asr = 0.0;
    for (std::size_t k = 0; k < 2; ++k) {
      const SweepCell& c = r.cells[v * 2 + k];
      EXPECT_EQ(c.value, s.value);
      EXPECT_EQ(c.seed, k);
      ASSERT_TRUE(c.report) << c.error;
      acc += c.report->acc;
      asr += c.report->asr;
    }
    EXPECT_EQ(s.ok, 2u);
    EXPECT_NEAR(s.acc_mean, acc / 2, 1e-12);
    EXPECT_NEAR(s.asr_mean, asr / 2, 1e-12);
  }
  // Replicate rows plus a mean and a stddev row per value.
  EXPECT_EQ(line_count(dir.path() / "sweep" / "sweep-q.csv"), 1u + 4u + 4u);
  EXPECT_TRUE(fs::exists(dir.path() / "sweep" / "q-0.3" / "seed-0" / "checkpoint.bin"));
}

TEST_F(CliRun, SweepRecordsFailedCells) {
  // Train split with only two non-target rows: 5% of 20 fits, 50% does not.
  auto write = [&](const char* name, int target_rows, int other_rows) {
    std::ofstream f(dir.path() / name);
    for (int i = 0; i < target_rows; ++i) f << "great fine film " << i << "\t1\n";
    for (int i = 0; i < other_rows; ++i) f << "awful dull film " << i << "\t0\n";
  };
  write("train.tsv", 18, 2);
  write("validation.tsv", 3, 3);
  write("test.tsv", 3, 3);
  RunConfig c = cfg;
  c.corpus.source = "tsv";
  c.corpus.train_tsv = (dir.path() / "train.tsv").string();
  c.corpus.validation_tsv = (dir.path() / "validation.tsv").string();
  c.corpus.test_tsv = (dir.path() / "test.tsv").string();
  const SweepResult r = run_sweep(c, "poison_rate", {"0.05", "0.5"}, DefenseMode::kNone, 1);
  ASSERT_EQ(r.cells.size(), 4u);
  EXPECT_TRUE(r.cells[0].report);
  EXPECT_TRUE(r.cells[1].report);
  EXPECT_FALSE(r.cells[2].report);
  EXPECT_FALSE(r.cells[2].error.empty());
  EXPECT_NE(r.cells[2].error.find("poison"), std::string::npos) << r.cells[2].error;
  EXPECT_EQ(r.summaries[1].ok, 0u);
}

TEST_F(CliRun, SweepRejectsBadAxisOrValue) {
  EXPECT_THROW(run_sweep(cfg, "depth", {"1"}, DefenseMode::kHoneypot, 1), ConfigError);
  EXPECT_THROW(run_sweep(cfg, "q", {"0.5", "banana"}, DefenseMode::kHoneypot, 1), ConfigError);
  EXPECT_THROW(run_sweep(cfg, "tap_layer", {"7"}, DefenseMode::kHoneypot, 1), ConfigError);
}

TEST_F(CliRun, ProbeCommandWritesCsv) {
  std::ostringstream log;
  ASSERT_EQ(cmd_probe(opts("probe"), {}, log), 0);
  EXPECT_EQ(line_count(dir.path() / "probe" / "probe.csv"),
            1 + (cfg.model.n_layers + 1) * (cfg.probe.steps / cfg.probe.eval_every));
  EXPECT_TRUE(fs::exists(dir.path() / "probe" / "embeddings" / "layer-0.csv"));
}

}  // namespace
}  // namespace honeypot
