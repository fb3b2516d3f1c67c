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

#include "honeypot/model.hpp"

#include <algorithm>
#include <cmath>

#include "honeypot/error.hpp"

namespace honeypot {

void ModelConfig::validate() const {
  if (vocab_size <= Vocab::kReserved) throw ConfigError("model: vocab_size too small");
  if (d_model == 0 || n_heads == 0 || d_model % n_heads != 0) {
    throw ConfigError("model: d_model must be divisible by n_heads");
  }
  if (n_layers < 2) throw ConfigError("model: need at least 2 layers");
  if (d_ff == 0) throw ConfigError("model: d_ff must be positive");
  if (max_seq_len < 2) throw ConfigError("model: max_seq_len must be >= 2");
  if (num_classes < 2) throw ConfigError("model: need at least 2 classes");
}

namespace {

// Token identity dominates the embedding sum; positions are a small offset.
constexpr double kTokenEmbeddingStd = 1.0;
constexpr double kPositionEmbeddingStd = 0.1;

template <typename T>
Parameter<T> xavier(std::string name, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor<T> w(Shape{fan_in, fan_out});
  for (auto& x : w.storage()) x = static_cast<T>((2.0 * uniform_unit(rng) - 1.0) * bound);
  return Parameter<T>(std::move(name), std::move(w));
}

// Uniform with the given standard deviation.
template <typename T>
Parameter<T> uniform_std(std::string name, Shape shape, double stddev, Rng& rng) {
  const double bound = stddev * std::sqrt(3.0);
  Tensor<T> w(std::move(shape));
  for (auto& x : w.storage()) x = static_cast<T>((2.0 * uniform_unit(rng) - 1.0) * bound);
  return Parameter<T>(std::move(name), std::move(w));
}

template <typename T>
Parameter<T> filled(std::string name, std::size_t n, T value) {
  return Parameter<T>(std::move(name), Tensor<T>(Shape{n}, value));
}

template <typename T>
Var<T> affine_norm(Graph<T>& g, Var<T> x, Parameter<T>& gain, Parameter<T>& bias) {
  return ops::add_rowvec(ops::mul_rowvec(ops::layer_norm(x), g.param(gain)), g.param(bias));
}

template <typename T>
Var<T> linear(Graph<T>& g, Var<T> x, Parameter<T>& w, Parameter<T>& b) {
  return ops::add_rowvec(ops::matmul(x, g.param(w)), g.param(b));
}

}  // namespace

template <typename T>
EncoderLayer<T>::EncoderLayer(const std::string& p, const ModelConfig& cfg, Rng& rng)
    : ln1_gain(filled<T>(p + ".ln1.gain", cfg.d_model, T{1})),
      ln1_bias(filled<T>(p + ".ln1.bias", cfg.d_model, T{0})),
      wq(xavier<T>(p + ".attn.wq", cfg.d_model, cfg.d_model, rng)),
      bq(filled<T>(p + ".attn.bq", cfg.d_model, T{0})),
      wk(xavier<T>(p + ".attn.wk", cfg.d_model, cfg.d_model, rng)),
      bk(filled<T>(p + ".attn.bk", cfg.d_model, T{0})),
      wv(xavier<T>(p + ".attn.wv", cfg.d_model, cfg.d_model, rng)),
      bv(filled<T>(p + ".attn.bv", cfg.d_model, T{0})),
      wo(xavier<T>(p + ".attn.wo", cfg.d_model, cfg.d_model, rng)),
      bo(filled<T>(p + ".attn.bo", cfg.d_model, T{0})),
      ln2_gain(filled<T>(p + ".ln2.gain", cfg.d_model, T{1})),
      ln2_bias(filled<T>(p + ".ln2.bias", cfg.d_model, T{0})),
      w1(xavier<T>(p + ".ffn.w1", cfg.d_model, cfg.d_ff, rng)),
      b1(filled<T>(p + ".ffn.b1", cfg.d_ff, T{0})),
      w2(xavier<T>(p + ".ffn.w2", cfg.d_ff, cfg.d_model, rng)),
      b2(filled<T>(p + ".ffn.b2", cfg.d_model, T{0})) {}

template <typename T>
Var<T> EncoderLayer<T>::forward(Graph<T>& g, Var<T> x, std::span<const std::size_t> lengths,
                                std::size_t heads) {
  Var<T> a = affine_norm(g, x, ln1_gain, ln1_bias);
  Var<T> att = ops::attention(linear(g, a, wq, bq), linear(g, a, wk, bk),
                              linear(g, a, wv, bv), lengths, heads);
  Var<T> h = ops::add(x, linear(g, att, wo, bo));
  Var<T> f = affine_norm(g, h, ln2_gain, ln2_bias);
  f = linear(g, ops::gelu(linear(g, f, w1, b1)), w2, b2);
  return ops::add(h, f);
}

template <typename T>
void EncoderLayer<T>::collect(std::vector<Parameter<T>*>& out) {
  for (Parameter<T>* p : {&ln1_gain, &ln1_bias, &wq, &bq, &wk, &bk, &wv, &bv, &wo, &bo,
                          &ln2_gain, &ln2_bias, &w1, &b1, &w2, &b2}) {
    out.push_back(p);
  }
}

template <typename T>
ClassifierHead<T>::ClassifierHead(const std::string& p, const ModelConfig& cfg, Rng& rng)
    : ln_gain(filled<T>(p + ".ln.gain", cfg.d_model, T{1})),
      ln_bias(filled<T>(p + ".ln.bias", cfg.d_model, T{0})),
      weight(xavier<T>(p + ".weight", cfg.d_model, cfg.num_classes, rng)),
      bias(filled<T>(p + ".bias", cfg.num_classes, T{0})) {}

template <typename T>
void ClassifierHead<T>::collect(std::vector<Parameter<T>*>& out) {
  for (Parameter<T>* p : {&ln_gain, &ln_bias, &weight, &bias}) out.push_back(p);
}

template <typename T>
TransformerStem<T>::TransformerStem(const ModelConfig& cfg, Rng rng)
    : cfg_(cfg),
      token_embedding_(uniform_std<T>("stem.token_embedding", Shape{cfg.vocab_size, cfg.d_model},
                                      kTokenEmbeddingStd, rng)),
      position_embedding_(uniform_std<T>("stem.position_embedding",
                                         Shape{cfg.max_seq_len, cfg.d_model},
                                         kPositionEmbeddingStd, rng)) {
  // [PAD] and [CLS] start blank so the [CLS] slot is filled by attention.
  for (const std::int32_t id : {Vocab::kPad, Vocab::kCls}) {
    auto row = token_embedding_.value.row(static_cast<std::size_t>(id));
    std::fill(row.begin(), row.end(), T{0});
  }
  layers_.reserve(cfg.n_layers);
  for (std::size_t i = 0; i < cfg.n_layers; ++i) {
    layers_.emplace_back("stem.layer" + std::to_string(i + 1), cfg, rng);
    // Residual branches start closed: the untrained stem is the identity.
    layers_.back().wo.value.fill(T{0});
    layers_.back().w2.value.fill(T{0});
  }
}

template <typename T>
std::vector<Var<T>> TransformerStem<T>::forward(Graph<T>& g, const Batch& batch,
                                                std::size_t up_to_layer) {
  if (batch.seq > cfg_.max_seq_len) {
    throw ShapeError("sequence length " + std::to_string(batch.seq) + " exceeds max_seq_len " +
                     std::to_string(cfg_.max_seq_len));
  }
  up_to_layer = std::min(up_to_layer, layers_.size());
  std::vector<std::int32_t> positions(batch.size * batch.seq);
  for (std::size_t i = 0; i < positions.size(); ++i) {
    positions[i] = static_cast<std::int32_t>(i % batch.seq);
  }
  std::vector<Var<T>> hidden;
  hidden.reserve(up_to_layer + 1);
  hidden.push_back(
      ops::add(ops::embedding(g.param(token_embedding_), batch.ids, batch.size, batch.seq),
               ops::embedding(g.param(position_embedding_), positions, batch.size, batch.seq)));
  for (std::size_t k = 0; k < up_to_layer; ++k) {
    hidden.push_back(layers_[k].forward(g, hidden.back(), batch.lengths, cfg_.n_heads));
  }
  return hidden;
}

template <typename T>
std::vector<Parameter<T>*> TransformerStem<T>::parameters() {
  std::vector<Parameter<T>*> out{&token_embedding_, &position_embedding_};
  for (auto& layer : layers_) layer.collect(out);
  return out;
}

template <typename T>
HoneypotHead<T>::HoneypotHead(const ModelConfig& cfg, std::size_t tap_layer, Rng rng)
    : tap_layer_(tap_layer),
      heads_(cfg.n_heads),
      layer_("honeypot.layer", cfg, rng),
      head_("honeypot.head", cfg, rng) {
  if (tap_layer > cfg.n_layers) {
    throw ConfigError("tap_layer " + std::to_string(tap_layer) + " outside [0, " +
                      std::to_string(cfg.n_layers) + "]");
  }
}

template <typename T>
HeadOutput<T> HoneypotHead<T>::forward(Graph<T>& g, Var<T> hidden_k,
                                       std::span<const std::size_t> lengths) {
  Var<T> h = layer_.forward(g, ops::stop_gradient(hidden_k), lengths, heads_);
  Var<T> feats = affine_norm(g, ops::select_position(h, 0), head_.ln_gain, head_.ln_bias);
  return {feats, linear(g, feats, head_.weight, head_.bias)};
}

template <typename T>
std::vector<Parameter<T>*> HoneypotHead<T>::parameters() {
  std::vector<Parameter<T>*> out;
  layer_.collect(out);
  head_.collect(out);
  return out;
}

template <typename T>
TaskHead<T>::TaskHead(const ModelConfig& cfg, Rng rng) : head_("task.head", cfg, rng) {}

template <typename T>
HeadOutput<T> TaskHead<T>::forward(Graph<T>& g, Var<T> hidden_top) {
  Var<T> feats =
      affine_norm(g, ops::select_position(hidden_top, 0), head_.ln_gain, head_.ln_bias);
  return {feats, linear(g, feats, head_.weight, head_.bias)};
}

template <typename T>
std::vector<Parameter<T>*> TaskHead<T>::parameters() {
  std::vector<Parameter<T>*> out;
  head_.collect(out);
  return out;
}

namespace {
Rng stream(const ModelConfig& cfg, const char* name) {
  cfg.validate();
  return Rng(derive_seed(cfg.init_seed, {tag(name)}));
}
}  // namespace

// Each part draws from its own stream so the stem's initialization does not
// depend on the honeypot's placement.
template <typename T>
Model<T>::Model(const ModelConfig& cfg, std::size_t tap_layer)
    : cfg_(cfg),
      stem_(cfg, stream(cfg, "init-stem")),
      task_(cfg, stream(cfg, "init-task")),
      honeypot_(cfg, tap_layer, stream(cfg, "init-honeypot")) {}

template <typename T>
std::vector<Parameter<T>*> Model<T>::task_parameters() {
  auto out = stem_.parameters();
  for (auto* p : task_.parameters()) out.push_back(p);
  return out;
}

template <typename T>
std::vector<Parameter<T>*> Model<T>::all_parameters() {
  auto out = task_parameters();
  for (auto* p : honeypot_.parameters()) out.push_back(p);
  return out;
}

template <typename T>
void Model<T>::check_batch(const Batch& batch) const {
  if (batch.seq > cfg_.max_seq_len) {
    throw ShapeError("sequence length " + std::to_string(batch.seq) + " exceeds max_seq_len");
  }
  for (const auto id : batch.ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= cfg_.vocab_size) {
      throw ShapeError("token id " + std::to_string(id) + " outside vocab");
    }
  }
}

template <typename T>
std::vector<Tensor<T>> snapshot(const std::vector<Parameter<T>*>& params) {
  std::vector<Tensor<T>> out;
  out.reserve(params.size());
  for (const auto* p : params) out.push_back(p->value);
  return out;
}

template <typename T>
Tensor<T> probabilities(const Tensor<T>& logits) {
  Tensor<T> out(logits.shape());
  const std::size_t w = logits.cols();
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const T* x = logits.data() + r * w;
    const T mx = *std::max_element(x, x + w);
    T z = 0;
    for (std::size_t c = 0; c < w; ++c) z += (out[r * w + c] = std::exp(x[c] - mx));
    for (std::size_t c = 0; c < w; ++c) out[r * w + c] /= z;
  }
  return out;
}

template <typename T>
std::vector<int> argmax_rows(const Tensor<T>& logits) {
  std::vector<int> out;
  const std::size_t w = logits.cols();
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < w; ++c) {
      if (logits[r * w + c] > logits[r * w + best]) best = c;
    }
    out.push_back(static_cast<int>(best));
  }
  return out;
}

#define HONEYPOT_INSTANTIATE_MODEL(T)                                         \
  template struct EncoderLayer<T>;                                            \
  template struct ClassifierHead<T>;                                          \
  template class TransformerStem<T>;                                          \
  template class HoneypotHead<T>;                                             \
  template class TaskHead<T>;                                                 \
  template class Model<T>;                                                    \
  template std::vector<Tensor<T>> snapshot(const std::vector<Parameter<T>*>&); \
  template Tensor<T> probabilities(const Tensor<T>&);                         \
  template std::vector<int> argmax_rows(const Tensor<T>&);

HONEYPOT_INSTANTIATE_MODEL(float)
HONEYPOT_INSTANTIATE_MODEL(double)

}  // namespace honeypot
