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

// Desk-scale behavioral checks (synthetic n=2000, L=4, d=64). Slow: each
// training run takes tens of seconds on one core.
#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>

#include "honeypot/defense.hpp"
#include "honeypot/evaluation.hpp"
#include "honeypot/pipeline.hpp"
#include "honeypot/probing.hpp"

namespace honeypot {
namespace {

struct SubsetMeans {
  double clean = 0.0;
  double poisoned = 0.0;
};

// Mean honeypot CE and mean normalized weight over the full train set.
struct FullPass {
  SubsetMeans honeypot_ce;
  SubsetMeans weight;
};

FullPass full_pass(Model<float>& m, const PoisonedDataset& data, std::size_t tap, double lbar,
                   const DefenseConfig& d) {
  std::vector<double> ce(data.size());
  for (const Batch& b : make_batches(data.data, 64, 0, 0, false)) {
    Graph<float> g(false);
    const auto h = m.stem().forward(g, b, tap);
    const auto out = m.honeypot().forward(g, h[tap], b.lengths);
    const auto v = ce_from_logits(out.logits.value(), b.labels);
    for (std::size_t r = 0; r < b.size; ++r) ce[b.indices[r]] = v[r];
  }
  const Weights w = compute_weight(ce, lbar, d.c, d.sigma);
  FullPass f;
  std::size_t nc = 0, np = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    SubsetMeans& hc = f.honeypot_ce;
    SubsetMeans& wt = f.weight;
    if (data.is_poisoned(i)) {
      hc.poisoned += ce[i];
      wt.poisoned += w.normalized[i];
      ++np;
    } else {
      hc.clean += ce[i];
      wt.clean += w.normalized[i];
      ++nc;
    }
  }
  f.honeypot_ce.clean /= static_cast<double>(nc);
  f.weight.clean /= static_cast<double>(nc);
  f.honeypot_ce.poisoned /= static_cast<double>(np);
  f.weight.poisoned /= static_cast<double>(np);
  return f;
}

class DeskScale : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    cfg_ = new RunConfig(default_run_config());
    data_ = new PreparedData(prepare_data(*cfg_, 0));
  }
  static void TearDownTestSuite() {
    delete data_;
    delete cfg_;
  }
  static RunConfig* cfg_;
  static PreparedData* data_;
};
RunConfig* DeskScale::cfg_ = nullptr;
PreparedData* DeskScale::data_ = nullptr;

TEST_F(DeskScale, DefendedTrainingSeparatesPoison) {
  const DefenseConfig d = defense_config_for(*cfg_, 0);
  Model<float> m(model_config_for(*cfg_, data_->vocab, 0), d.tap_layer);
  HoneypotTrainer<float> t(m, data_->poisoned_train, d);
  t.warmup();

  // L-bar cancels in the clean/poisoned W ratio, so any positive value works here.
  const FullPass warm = full_pass(m, data_->poisoned_train, d.tap_layer, 1.0, d);
  EXPECT_LT(warm.honeypot_ce.poisoned, warm.honeypot_ce.clean);
  EXPECT_GE(warm.honeypot_ce.clean / warm.honeypot_ce.poisoned, 2.0)
      << "clean " << warm.honeypot_ce.clean << " poisoned " << warm.honeypot_ce.poisoned;

  const auto metrics = t.train();
  const auto epochs = summarize_weights(metrics);
  ASSERT_EQ(epochs.size(), d.epochs);
  for (const auto& e : epochs) {
    EXPECT_GE(e.w_clean / e.w_poisoned, 2.0) << "epoch " << e.epoch;
  }
  EXPECT_GE(epochs.back().poisoned_zero_fraction, 0.9);

  const FullPass end = full_pass(m, data_->poisoned_train, d.tap_layer, t.window().mean(), d);
  EXPECT_LT(end.weight.poisoned, end.weight.clean)
      << "poisoned " << end.weight.poisoned << " clean " << end.weight.clean;
}

TEST_F(DeskScale, UndefendedLearnsBackdoor) {
  const DefenseConfig d = defense_config_for(*cfg_, 0);
  Model<float> m(model_config_for(*cfg_, data_->vocab, 0), d.tap_layer);
  train_undefended(m, data_->poisoned_train, d);
  const EvalReport r = evaluate(m, data_->test, data_->poisoned_test);
  EXPECT_GE(r.asr, 0.9);
  EXPECT_GE(r.acc, 0.9);
}

const std::vector<ProbeResult>& probe_layers(const RunConfig& cfg) {
  static const std::vector<ProbeResult> layers = run_probe(cfg, 0, 1).layers;
  return layers;
}

TEST_F(DeskScale, LowerLayerProbesOverfitPoison) {
  const auto& layers = probe_layers(*cfg_);
  ASSERT_EQ(layers.size(), cfg_->model.n_layers + 1);
  for (std::size_t k : {0u, 1u}) {
    EXPECT_LT(layers[k].train_poisoned.back(), 0.1) << "layer " << k;
    EXPECT_LT(layers[k].val_poisoned, layers[k].val_clean) << "layer " << k;
  }
}

TEST_F(DeskScale, LowerLayersBeatTopLayer) {
  const auto& layers = probe_layers(*cfg_);
  ASSERT_EQ(layers.size(), cfg_->model.n_layers + 1);
  for (const auto& r : layers) {
    std::printf("layer %zu val_clean %.5f val_poisoned %.5f\n", r.layer, r.val_clean, r.val_poisoned);
  }
  const auto& top = layers.back();
  const double best_low = std::min(layers[0].val_poisoned, layers[1].val_poisoned);
  const double gap_low = std::max(layers[0].val_clean - layers[0].val_poisoned,
                                  layers[1].val_clean - layers[1].val_poisoned);
  EXPECT_TRUE(best_low <= top.val_poisoned || gap_low > top.val_clean - top.val_poisoned)
      << "low " << best_low << " top " << top.val_poisoned;
}

}  // namespace
}  // namespace honeypot
