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

#include "honeypot/probing.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <numeric>
#include <thread>

#include "honeypot/adam.hpp"
#include "honeypot/defense.hpp"
#include "honeypot/error.hpp"

namespace honeypot {

void ProbeConfig::validate(std::size_t n_layers) const {
  if (layer > n_layers) {
    throw ConfigError("probe layer " + std::to_string(layer) + " outside 0.." +
                      std::to_string(n_layers));
  }
  if (steps == 0) throw ConfigError("probe steps must be positive");
  if (batch_size == 0) throw ConfigError("probe batch_size must be positive");
  if (eval_every == 0) throw ConfigError("probe eval_every must be positive");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("probe learning_rate must be positive");
  }
}

template <typename T>
LayerFeatures<T>::LayerFeatures(TransformerStem<T>& stem, const Dataset& data,
                                std::size_t layer, std::size_t batch_size)
    : layer_(layer), width_(0), blocks_(data.size()) {
  if (layer > stem.n_layers()) throw ConfigError("feature layer outside the stem");
  for (const Batch& b : make_batches(data, batch_size, 0, 0, false)) {
    Graph<T> g(false);
    const auto hidden = stem.forward(g, b, layer);
    const Tensor<T>& h = hidden[layer].value();
    width_ = h.dim(2);
    for (std::size_t r = 0; r < b.size; ++r) {
      const std::size_t len = b.lengths[r];
      Tensor<T> block({len, width_});
      const T* src = h.data() + r * b.seq * width_;
      std::copy(src, src + len * width_, block.data());
      blocks_[b.indices[r]] = std::move(block);
    }
  }
}

template <typename T>
Tensor<T> LayerFeatures<T>::gather(std::span<const std::size_t> rows,
                                   std::vector<std::size_t>& lengths) const {
  lengths.clear();
  std::size_t longest = 0;
  for (const std::size_t r : rows) {
    lengths.push_back(blocks_.at(r).dim(0));
    longest = std::max(longest, lengths.back());
  }
  Tensor<T> out({rows.size(), longest, width_});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Tensor<T>& b = blocks_[rows[i]];
    std::copy(b.data(), b.data() + b.size(), out.data() + i * longest * width_);
  }
  return out;
}

namespace {

template <typename T>
std::vector<double> per_example_ce(HoneypotHead<T>& probe, const LayerFeatures<T>& feats,
                                   const Dataset& data, std::size_t batch_size) {
  std::vector<double> out(data.size());
  std::vector<std::size_t> lengths;
  for (const Batch& b : make_batches(data, batch_size, 0, 0, false)) {
    Graph<T> g(false);
    const Var<T> x = g.constant(feats.gather(b.indices, lengths));
    const HeadOutput<T> o = probe.forward(g, x, lengths);
    const auto ce = ce_from_logits(o.logits.value(), b.labels);
    for (std::size_t r = 0; r < b.size; ++r) out[b.indices[r]] = ce[r];
  }
  return out;
}

// (clean mean, poisoned mean); regularizers count as clean. NaN for an empty
// subset.
std::pair<double, double> split_means(const std::vector<double>& ce,
                                      const PoisonedDataset& data) {
  double sc = 0.0, sp = 0.0;
  std::size_t nc = 0, np = 0;
  for (std::size_t i = 0; i < ce.size(); ++i) {
    if (data.is_poisoned(i)) {
      sp += ce[i];
      ++np;
    } else {
      sc += ce[i];
      ++nc;
    }
  }
  const double nan = std::nan("");
  return {nc ? sc / static_cast<double>(nc) : nan, np ? sp / static_cast<double>(np) : nan};
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::nan("");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

template <typename T>
ProbeResult train_probe(Model<T>& frozen, const ProbeData& data, const ProbeConfig& cfg,
                        TrainedProbe<T>* trained) {
  const ModelConfig& mc = frozen.config();
  cfg.validate(mc.n_layers);
  if (data.train.size() == 0) throw ConfigError("probe: empty training set");

  auto feats = std::make_unique<LayerFeatures<T>>(frozen.stem(), data.train.data, cfg.layer);
  const LayerFeatures<T> val_clean(frozen.stem(), data.val_clean, cfg.layer);
  const LayerFeatures<T> val_poisoned(frozen.stem(), data.val_poisoned.data, cfg.layer);

  auto probe = std::make_unique<HoneypotHead<T>>(
      mc, cfg.layer, Rng(derive_seed(cfg.seed, {tag("probe"), cfg.layer})));
  Adam<T> opt(probe->parameters(), AdamOptions{.learning_rate = cfg.learning_rate});

  ProbeResult result;
  result.layer = cfg.layer;
  const std::uint64_t shuffle_seed = derive_seed(cfg.seed, {tag("probe-batches")});
  std::vector<Batch> batches;
  std::uint64_t pass = 0;
  std::size_t cursor = 0;
  std::vector<std::size_t> lengths;

  for (std::size_t step = 1; step <= cfg.steps; ++step) {
    if (cursor == batches.size()) {
      batches = make_batches(data.train.data, cfg.batch_size, shuffle_seed, pass++, true);
      cursor = 0;
    }
    const Batch& b = batches[cursor++];
    Graph<T> g;
    const Var<T> x = g.constant(feats->gather(b.indices, lengths));
    const HeadOutput<T> o = probe->forward(g, x, lengths);
    g.backward(ops::mean(ce_loss(o.logits, b.labels)));
    opt.step();

    if (step % cfg.eval_every == 0 || step == cfg.steps) {
      const auto ce = per_example_ce(*probe, *feats, data.train.data, 64);
      const auto [c, p] = split_means(ce, data.train);
      result.steps.push_back(step);
      result.train_clean.push_back(c);
      result.train_poisoned.push_back(p);
    }
  }

  if (data.val_clean.size() > 0) {
    result.val_clean = mean_of(per_example_ce(*probe, val_clean, data.val_clean, 64));
  }
  if (data.val_poisoned.size() > 0) {
    result.val_poisoned =
        mean_of(per_example_ce(*probe, val_poisoned, data.val_poisoned.data, 64));
  }

  if (trained) {
    trained->probe = std::move(probe);
    trained->features = std::move(feats);
  }
  return result;
}

template <typename T>
std::vector<ProbeResult> sweep_layers(Model<T>& frozen, const ProbeData& data,
                                      const ProbeConfig& cfg, std::size_t jobs,
                                      std::vector<TrainedProbe<T>>* trained) {
  const std::size_t n = frozen.config().n_layers + 1;
  std::vector<ProbeResult> results(n);
  std::vector<TrainedProbe<T>> probes(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};

  // Stem reads go through no-grad graphs only, so workers can share it.
  auto worker = [&] {
    for (std::size_t k = next++; k < n; k = next++) {
      try {
        ProbeConfig c = cfg;
        c.layer = k;
        results[k] = train_probe(frozen, data, c, trained ? &probes[k] : nullptr);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(jobs, 1, n);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  if (trained) *trained = std::move(probes);
  return results;
}

template <typename T>
void export_embeddings(HoneypotHead<T>& probe, const LayerFeatures<T>& features,
                       const PoisonedDataset& data, const std::filesystem::path& path) {
  if (features.size() != data.size()) throw ShapeError("export_embeddings: feature/data size mismatch");
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  const std::size_t d = features.width();
  out << "index,is_poisoned,label";
  for (std::size_t j = 0; j < d; ++j) out << ",e" << j;
  out << '\n';
  out.precision(9);
  std::vector<std::size_t> lengths;
  for (const Batch& b : make_batches(data.data, 64, 0, 0, false)) {
    Graph<T> g(false);
    const Var<T> x = g.constant(features.gather(b.indices, lengths));
    const Tensor<T>& f = probe.forward(g, x, lengths).features.value();
    for (std::size_t r = 0; r < b.size; ++r) {
      const std::size_t i = b.indices[r];
      out << i << ',' << (data.is_poisoned(i) ? 1 : 0) << ',' << data.data.examples[i].label;
      for (std::size_t j = 0; j < d; ++j) out << ',' << f.at(r, j);
      out << '\n';
    }
  }
  if (!out) throw IoError("write failed for " + path.string());
}

#define HONEYPOT_PROBING(T)                                                                  \
  template class LayerFeatures<T>;                                                           \
  template ProbeResult train_probe(Model<T>&, const ProbeData&, const ProbeConfig&,          \
                                   TrainedProbe<T>*);                                        \
  template std::vector<ProbeResult> sweep_layers(Model<T>&, const ProbeData&,                \
                                                 const ProbeConfig&, std::size_t,            \
                                                 std::vector<TrainedProbe<T>>*);             \
  template void export_embeddings(HoneypotHead<T>&, const LayerFeatures<T>&,                 \
                                  const PoisonedDataset&, const std::filesystem::path&);

HONEYPOT_PROBING(float)
HONEYPOT_PROBING(double)

#undef HONEYPOT_PROBING

}  // namespace honeypot
