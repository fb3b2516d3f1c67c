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

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

#include "honeypot/model.hpp"
#include "honeypot/poison.hpp"

namespace honeypot {

struct ProbeConfig {
  std::size_t layer = 1;
  std::size_t steps = 500;
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t eval_every = 25;
  std::uint64_t seed = 0;

  void validate(std::size_t n_layers) const;
};

struct ProbeResult {
  std::size_t layer = 0;
  std::vector<std::size_t> steps;       // eval points
  std::vector<double> train_clean;      // mean CE over clean train rows
  std::vector<double> train_poisoned;   // mean CE over poisoned train rows
  double val_clean = 0.0;
  double val_poisoned = 0.0;

  friend bool operator==(const ProbeResult&, const ProbeResult&) = default;
};

// Frozen stem hidden states at one layer, one [length, d_model] block per
// example. Computed once, without gradients.
template <typename T>
class LayerFeatures {
 public:
  LayerFeatures(TransformerStem<T>& stem, const Dataset& data, std::size_t layer,
                std::size_t batch_size = 64);

  std::size_t layer() const { return layer_; }
  std::size_t size() const { return blocks_.size(); }
  std::size_t width() const { return width_; }
  const Tensor<T>& block(std::size_t i) const { return blocks_.at(i); }

  // [rows, longest, width], zero-padded.
  Tensor<T> gather(std::span<const std::size_t> rows, std::vector<std::size_t>& lengths) const;

 private:
  std::size_t layer_;
  std::size_t width_;
  std::vector<Tensor<T>> blocks_;
};

struct ProbeData {
  const PoisonedDataset& train;
  const Dataset& val_clean;
  const PoisonedDataset& val_poisoned;
};

// Trains a fresh HoneypotHead-shaped probe with plain CE on frozen layer
// features. The stem is only read. When `trained` is given, the probe and its
// train features are handed back for embedding export.
template <typename T>
struct TrainedProbe {
  std::unique_ptr<HoneypotHead<T>> probe;
  std::unique_ptr<LayerFeatures<T>> features;
};

template <typename T>
ProbeResult train_probe(Model<T>& frozen, const ProbeData& data, const ProbeConfig& cfg,
                        TrainedProbe<T>* trained = nullptr);

// Layers 0..L with equal budgets, in layer order. jobs > 1 runs layers on
// worker threads.
template <typename T>
std::vector<ProbeResult> sweep_layers(Model<T>& frozen, const ProbeData& data,
                                      const ProbeConfig& cfg, std::size_t jobs = 1,
                                      std::vector<TrainedProbe<T>>* trained = nullptr);

// CSV "index,is_poisoned,label,e0..e{d-1}", one row per example of `data`.
template <typename T>
void export_embeddings(HoneypotHead<T>& probe, const LayerFeatures<T>& features,
                       const PoisonedDataset& data, const std::filesystem::path& path);

}  // namespace honeypot
