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
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "honeypot/autograd.hpp"
#include "honeypot/corpus.hpp"
#include "honeypot/rng.hpp"

namespace honeypot {

struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t d_model = 64;
  std::size_t n_layers = 4;
  std::size_t n_heads = 4;
  std::size_t d_ff = 128;
  std::size_t max_seq_len = 64;
  std::size_t num_classes = 2;
  std::uint64_t init_seed = 0;

  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Pre-norm encoder block: x + attn(ln(x)), then h + ffn(ln(h)).
template <typename T>
struct EncoderLayer {
  Parameter<T> ln1_gain, ln1_bias;
  Parameter<T> wq, bq, wk, bk, wv, bv, wo, bo;
  Parameter<T> ln2_gain, ln2_bias;
  Parameter<T> w1, b1, w2, b2;

  EncoderLayer(const std::string& prefix, const ModelConfig& cfg, Rng& rng);
  Var<T> forward(Graph<T>& g, Var<T> x, std::span<const std::size_t> lengths,
                 std::size_t heads);
  void collect(std::vector<Parameter<T>*>& out);
};

// Layer norm + linear classifier over the [CLS] position.
template <typename T>
struct ClassifierHead {
  Parameter<T> ln_gain, ln_bias, weight, bias;

  ClassifierHead(const std::string& prefix, const ModelConfig& cfg, Rng& rng);
  void collect(std::vector<Parameter<T>*>& out);
};

template <typename T>
struct HeadOutput {
  Var<T> features;  // pre-classifier [CLS] vector, [batch, d_model]
  Var<T> logits;    // [batch, classes]
};

template <typename T>
class TransformerStem {
 public:
  TransformerStem(const ModelConfig& cfg, Rng rng);

  // Hidden states 0..up_to_layer: index 0 is the embedding sum, index k the
  // output of encoder layer k.
  std::vector<Var<T>> forward(Graph<T>& g, const Batch& batch,
                              std::size_t up_to_layer);
  std::vector<Var<T>> forward(Graph<T>& g, const Batch& batch) {
    return forward(g, batch, layers_.size());
  }

  std::vector<Parameter<T>*> parameters();
  std::size_t n_layers() const { return layers_.size(); }
  Parameter<T>& token_embedding() { return token_embedding_; }

 private:
  ModelConfig cfg_;
  Parameter<T> token_embedding_;
  Parameter<T> position_embedding_;
  std::vector<EncoderLayer<T>> layers_;
};

// One encoder layer and a classifier fed from stem hidden state tap_layer.
// The input passes through a gradient barrier, so honeypot losses never reach
// the stem.
template <typename T>
class HoneypotHead {
 public:
  HoneypotHead(const ModelConfig& cfg, std::size_t tap_layer, Rng rng);

  HeadOutput<T> forward(Graph<T>& g, Var<T> hidden_k, std::span<const std::size_t> lengths);
  std::vector<Parameter<T>*> parameters();
  std::size_t tap_layer() const { return tap_layer_; }

 private:
  std::size_t tap_layer_;
  std::size_t heads_;
  EncoderLayer<T> layer_;
  ClassifierHead<T> head_;
};

template <typename T>
class TaskHead {
 public:
  TaskHead(const ModelConfig& cfg, Rng rng);
  HeadOutput<T> forward(Graph<T>& g, Var<T> hidden_top);
  std::vector<Parameter<T>*> parameters();

 private:
  ClassifierHead<T> head_;
};

// Stem + task head (theta_T) and honeypot (theta_H). Parameters have stable
// addresses for the model's lifetime, so the type is pinned in place.
template <typename T>
class Model {
 public:
  Model(const ModelConfig& cfg, std::size_t tap_layer);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelConfig& config() const { return cfg_; }
  TransformerStem<T>& stem() { return stem_; }
  TaskHead<T>& task() { return task_; }
  HoneypotHead<T>& honeypot() { return honeypot_; }

  std::vector<Parameter<T>*> stem_parameters() { return stem_.parameters(); }
  std::vector<Parameter<T>*> task_head_parameters() { return task_.parameters(); }
  // theta_T: everything the task loss trains.
  std::vector<Parameter<T>*> task_parameters();
  // theta_H.
  std::vector<Parameter<T>*> honeypot_parameters() { return honeypot_.parameters(); }
  std::vector<Parameter<T>*> all_parameters();

  // Checks ids and lengths against the config.
  void check_batch(const Batch& batch) const;

 private:
  ModelConfig cfg_;
  TransformerStem<T> stem_;
  TaskHead<T> task_;
  HoneypotHead<T> honeypot_;
};

// Snapshot of parameter values in registry order.
template <typename T>
std::vector<Tensor<T>> snapshot(const std::vector<Parameter<T>*>& params);

// Row-wise softmax of logits as plain numbers.
template <typename T>
Tensor<T> probabilities(const Tensor<T>& logits);

// Lowest class id wins ties.
template <typename T>
std::vector<int> argmax_rows(const Tensor<T>& logits);

}  // namespace honeypot
