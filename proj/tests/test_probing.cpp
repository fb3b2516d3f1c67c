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

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "honeypot/defense.hpp"
#include "honeypot/error.hpp"
#include "honeypot/pipeline.hpp"
#include "honeypot/probing.hpp"
#include "test_util.hpp"

namespace honeypot {
namespace {

class ProbingTest : public ::testing::Test {
 protected:
  RunConfig cfg = test::tiny_run_config(200);
  PreparedData data = prepare_data(cfg, 0);
  std::unique_ptr<Model<float>> stem;
  ProbeConfig probe = cfg.probe;

  void SetUp() override {
    stem = std::make_unique<Model<float>>(model_config_for(cfg, data.vocab, 0), 1);
    train_undefended(*stem, data.poisoned_train, defense_config_for(cfg, 0));
  }
  ProbeData probe_data() const {
    return {data.poisoned_train, data.validation, data.poisoned_validation};
  }
};

TEST_F(ProbingTest, ConfigValidation) {
  ProbeConfig c;
  EXPECT_NO_THROW(c.validate(4));
  c.layer = 5;
  EXPECT_THROW(c.validate(4), ConfigError);
  c = {};
  c.steps = 0;
  EXPECT_THROW(c.validate(4), ConfigError);
  c = {};
  c.eval_every = 0;
  EXPECT_THROW(c.validate(4), ConfigError);
  c.layer = 3;
  EXPECT_THROW(train_probe(*stem, probe_data(), c), ConfigError);
}

TEST_F(ProbingTest, StemUnchangedBitwise) {
  const auto before = snapshot(stem->all_parameters());
  probe.layer = 1;
  train_probe(*stem, probe_data(), probe);
  EXPECT_EQ(snapshot(stem->all_parameters()), before);
}

TEST_F(ProbingTest, SeriesShapeAndFinite) {
  const ProbeResult r = train_probe(*stem, probe_data(), probe);
  EXPECT_EQ(r.layer, probe.layer);
  EXPECT_EQ(r.steps, (std::vector<std::size_t>{10, 20}));
  ASSERT_EQ(r.train_clean.size(), r.steps.size());
  ASSERT_EQ(r.train_poisoned.size(), r.steps.size());
  for (std::size_t i = 0; i < r.steps.size(); ++i) {
    EXPECT_TRUE(std::isfinite(r.train_clean[i]));
    EXPECT_TRUE(std::isfinite(r.train_poisoned[i]));
  }
  EXPECT_TRUE(std::isfinite(r.val_clean));
  EXPECT_TRUE(std::isfinite(r.val_poisoned));
}

// Probe at layer k only sees hidden state k: wrecking deeper encoder layers
// must not move the result.
TEST_F(ProbingTest, DeeperLayersIrrelevant) {
  probe.layer = 1;
  const ProbeResult a = train_probe(*stem, probe_data(), probe);
  for (Parameter<float>* p : stem->stem_parameters()) {
    if (p->name.rfind("stem.layer2", 0) == 0) p->value.fill(0.0f);
  }
  EXPECT_EQ(train_probe(*stem, probe_data(), probe), a);
  // Sanity: layer 2 does depend on them.
  probe.layer = 2;
  ModelConfig mc = stem->config();
  Model<float> fresh(mc, 1);
  train_undefended(fresh, data.poisoned_train, defense_config_for(cfg, 0));
  EXPECT_NE(train_probe(fresh, probe_data(), probe), train_probe(*stem, probe_data(), probe));
}

// Weighted subset means reproduce the overall mean CE of the final probe.
TEST_F(ProbingTest, CleanPoisonSplitIsPartition) {
  TrainedProbe<float> tp;
  const ProbeResult r = train_probe(*stem, probe_data(), probe, &tp);
  ASSERT_TRUE(tp.probe && tp.features);
  const auto& train = data.poisoned_train;
  std::vector<std::size_t> rows(train.size());
  std::iota(rows.begin(), rows.end(), 0);
  std::vector<std::size_t> lengths;
  const Tensor<float> x = tp.features->gather(rows, lengths);
  Graph<float> g(false);
  const auto out = tp.probe->forward(g, g.leaf(x, false), lengths);
  std::vector<int> labels;
  for (const Example& e : train.data.examples) labels.push_back(e.label);
  const auto ce = ce_from_logits(out.logits.value(), labels);
  double overall = 0.0;
  std::size_t np = 0;
  for (std::size_t i = 0; i < ce.size(); ++i) {
    overall += ce[i];
    np += train.is_poisoned(i) ? 1 : 0;
  }
  overall /= static_cast<double>(ce.size());
  const double nc = static_cast<double>(train.size() - np);
  const double combined =
      (nc * r.train_clean.back() + static_cast<double>(np) * r.train_poisoned.back()) /
      static_cast<double>(train.size());
  EXPECT_NEAR(combined, overall, 1e-6);
}

TEST_F(ProbingTest, SweepOrderAndDeterminism) {
  const auto a = sweep_layers(*stem, probe_data(), probe, 1);
  ASSERT_EQ(a.size(), cfg.model.n_layers + 1);
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_EQ(a[k].layer, k);
  EXPECT_EQ(sweep_layers(*stem, probe_data(), probe, 2), a);
}

TEST_F(ProbingTest, EmbeddingExport) {
  test::TempDir dir("emb");
  TrainedProbe<float> tp;
  train_probe(*stem, probe_data(), probe, &tp);
  const auto path = dir.path() / "layer.csv";
  export_embeddings(*tp.probe, *tp.features, data.poisoned_train, path);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  std::string want = "index,is_poisoned,label";
  for (std::size_t j = 0; j < cfg.model.d_model; ++j) want += ",e" + std::to_string(j);
  EXPECT_EQ(header, want);
  std::size_t n = 0;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cells.push_back(c);
    ASSERT_EQ(cells.size(), 3 + cfg.model.d_model);
    const std::size_t idx = std::stoul(cells[0]);
    EXPECT_EQ(idx, n);
    EXPECT_EQ(cells[1] == "1", data.poisoned_train.is_poisoned(idx));
    EXPECT_EQ(std::stoi(cells[2]), data.poisoned_train.data.examples[idx].label);
    ++n;
  }
  EXPECT_EQ(n, data.poisoned_train.size());
  EXPECT_THROW(export_embeddings(*tp.probe, *tp.features, data.poisoned_train,
                                 dir.path() / "missing" / "x.csv"),
               IoError);
}

TEST(ProbeRun, CsvRowCountAndDeterminism) {
  const RunConfig cfg = test::tiny_run_config(200);
  test::TempDir a("probe-a"), b("probe-b");
  run_probe(cfg, 0, 1, a.path());
  run_probe(cfg, 0, 1, b.path());
  std::ifstream in(a.path() / "probe.csv");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "layer,step,clean_loss,poison_loss");
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, (cfg.model.n_layers + 1) * (cfg.probe.steps / cfg.probe.eval_every));
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream f(p);
    return std::string(std::istreambuf_iterator<char>(f), {});
  };
  EXPECT_EQ(slurp(a.path() / "probe.csv"), slurp(b.path() / "probe.csv"));
  EXPECT_EQ(slurp(a.path() / "embeddings" / "layer-1.csv"), slurp(b.path() / "embeddings" / "layer-1.csv"));
  for (std::size_t k = 0; k <= cfg.model.n_layers; ++k) {
    EXPECT_TRUE(std::filesystem::exists(a.path() / "embeddings" / ("layer-" + std::to_string(k) + ".csv")));
  }
}

}  // namespace
}  // namespace honeypot
