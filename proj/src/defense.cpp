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

#include "honeypot/defense.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "honeypot/error.hpp"

namespace honeypot {

std::string to_string(SigmaKind kind) {
  switch (kind) {
    case SigmaKind::kSign: return "sign";
    case SigmaKind::kSigmoid: return "sigmoid";
    case SigmaKind::kCutoffRelu: return "cutoff_relu";
  }
  return "?";
}

SigmaKind parse_sigma_kind(const std::string& s) {
  if (s == "sign") return SigmaKind::kSign;
  if (s == "sigmoid") return SigmaKind::kSigmoid;
  if (s == "cutoff_relu") return SigmaKind::kCutoffRelu;
  throw ConfigError("unknown sigma kind '" + s + "' (expected sign, sigmoid or cutoff_relu)");
}

void DefenseConfig::validate(std::size_t n_layers) const {
  if (!(q > 0.0 && q <= 1.0)) throw ConfigError("q must be in (0, 1]");
  if (!(c > 0.0)) throw ConfigError("c must be > 0");
  if (window_t < 1) throw ConfigError("window_t must be >= 1");
  if (warmup_steps && *warmup_steps == 0) throw ConfigError("warmup_steps must be >= 1");
  if (tap_layer > n_layers) {
    throw ConfigError("tap_layer " + std::to_string(tap_layer) + " exceeds n_layers " +
                      std::to_string(n_layers));
  }
  if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be >= 0");
  if (!(warmup_learning_rate >= 0.0)) throw ConfigError("warmup_learning_rate must be >= 0");
  if (honeypot_learning_rate && !(*honeypot_learning_rate >= 0.0)) {
    throw ConfigError("honeypot_learning_rate must be >= 0");
  }
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
}

std::size_t DefenseConfig::resolved_warmup_steps(std::size_t train_size) const {
  if (warmup_steps) return *warmup_steps;
  return std::max<std::size_t>(1, (train_size + batch_size - 1) / batch_size);
}

// ---- losses ---------------------------------------------------------------

namespace {

void check_rows(std::size_t rows, std::size_t classes, std::span<const int> y) {
  if (rows != y.size()) {
    throw ShapeError("loss: " + std::to_string(rows) + " rows but " + std::to_string(y.size()) +
                     " labels");
  }
  for (const int label : y) {
    if (label < 0 || static_cast<std::size_t>(label) >= classes) {
      throw ShapeError("loss: label " + std::to_string(label) + " out of range");
    }
  }
}

template <typename T>
std::vector<double> ce_probs(const Tensor<T>& probs, std::span<const int> y) {
  if (probs.rank() != 2) throw ShapeError("ce_loss expects [batch, classes]");
  check_rows(probs.rows(), probs.cols(), y);
  std::vector<double> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    out[i] = -std::log(static_cast<double>(probs.at(i, static_cast<std::size_t>(y[i]))));
  }
  return out;
}

}  // namespace

std::vector<double> ce_loss(const Tensor<double>& probs, std::span<const int> y) {
  return ce_probs(probs, y);
}

std::vector<double> ce_loss(const Tensor<float>& probs, std::span<const int> y) {
  return ce_probs(probs, y);
}

std::vector<double> gce_loss(const Tensor<double>& probs, std::span<const int> y, double q) {
  if (!(q > 0.0 && q <= 1.0)) throw ConfigError("gce_loss: q must be in (0, 1]");
  if (probs.rank() != 2) throw ShapeError("gce_loss expects [batch, classes]");
  check_rows(probs.rows(), probs.cols(), y);
  std::vector<double> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double f = probs.at(i, static_cast<std::size_t>(y[i]));
    // expm1 keeps (1 - f^q)/q accurate as q -> 0.
    out[i] = -std::expm1(q * std::log(f)) / q;
  }
  return out;
}

template <typename T>
std::vector<double> ce_from_logits(const Tensor<T>& logits, std::span<const int> y) {
  if (logits.rank() != 2) throw ShapeError("ce_from_logits expects [batch, classes]");
  check_rows(logits.rows(), logits.cols(), y);
  const std::size_t k = logits.cols();
  std::vector<double> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const auto row = logits.row(i);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < k; ++j) mx = std::max(mx, static_cast<double>(row[j]));
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += std::exp(static_cast<double>(row[j]) - mx);
    out[i] = mx + std::log(s) - static_cast<double>(row[static_cast<std::size_t>(y[i])]);
  }
  return out;
}

template <typename T>
Var<T> ce_loss(Var<T> logits, std::span<const int> y) {
  return ops::scale(ops::pick(ops::log_softmax(logits), y), T(-1));
}

template <typename T>
Var<T> gce_loss(Var<T> logits, std::span<const int> y, T q) {
  if (!(q > T(0) && q <= T(1))) throw ConfigError("gce_loss: q must be in (0, 1]");
  Var<T> fq = ops::exp(ops::scale(ops::pick(ops::log_softmax(logits), y), q));
  return ops::affine(fq, T(-1) / q, T(1) / q);
}

double gce_gradient_identity_check(const Tensor<double>& logits, std::span<const int> y,
                                   double q) {
  Graph<double> g;
  Var<double> z = g.leaf(logits, true);
  g.backward(ops::sum(gce_loss(z, y, q)));
  const Tensor<double>& auto_grad = g.grad(z);
  const Tensor<double> p = probabilities(logits);
  double worst = 0.0;
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const auto yi = static_cast<std::size_t>(y[i]);
    const double scale = std::pow(p.at(i, yi), q);
    for (std::size_t j = 0; j < logits.cols(); ++j) {
      const double ce_grad = p.at(i, j) - (j == yi ? 1.0 : 0.0);
      const double expected = scale * ce_grad;
      const double got = auto_grad.empty() ? 0.0 : auto_grad.at(i, j);
      const double err = std::abs(got - expected) / std::max(1e-12, std::abs(expected));
      // Coordinates that are zero on both sides carry no relative information.
      if (std::abs(expected) < 1e-300 && std::abs(got) < 1e-300) continue;
      worst = std::max(worst, err);
    }
  }
  return worst;
}

// ---- reweighting ----------------------------------------------------------

LossWindow::LossWindow(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("loss window capacity must be >= 1");
}

void LossWindow::push(double value) {
  values_.push_back(value);
  if (values_.size() > capacity_) values_.pop_front();
  ++pushed_;
}

double LossWindow::mean() const {
  if (values_.empty()) throw NumericError("window mean of an empty loss window");
  return std::accumulate(values_.begin(), values_.end(), 0.0) /
         static_cast<double>(values_.size());
}

double window_mean(const LossWindow& window) { return window.mean(); }

double normalize_weight(double x, SigmaKind kind) {
  switch (kind) {
    case SigmaKind::kSign: return x < 0.0 ? 0.0 : 1.0;
    case SigmaKind::kSigmoid: return 1.0 / (1.0 + std::exp(-x));
    case SigmaKind::kCutoffRelu: return std::clamp(x, 0.0, 1.0);
  }
  return 0.0;
}

Weights compute_weight(std::span<const double> honeypot_ce, double lbar, double c,
                       SigmaKind kind) {
  const double denom = std::max(lbar, kWindowFloor);
  Weights w;
  w.ratio.resize(honeypot_ce.size());
  w.normalized.resize(honeypot_ce.size());
  for (std::size_t i = 0; i < honeypot_ce.size(); ++i) {
    w.ratio[i] = honeypot_ce[i] / denom;
    w.normalized[i] = normalize_weight(w.ratio[i] - c, kind);
  }
  return w;
}

template <typename T>
WceResult<T> wce_loss(Var<T> task_ce, std::span<const double> weights) {
  std::vector<T> w(weights.begin(), weights.end());
  WceResult<T> out;
  out.skip_update = std::all_of(weights.begin(), weights.end(), [](double x) { return x == 0.0; });
  out.loss = ops::weighted_mean(task_ce, std::span<const T>(w));
  return out;
}

double wce_value(std::span<const double> ce, std::span<const double> weights) {
  if (ce.size() != weights.size()) throw ShapeError("wce_value: size mismatch");
  if (ce.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < ce.size(); ++i) {
    if (weights[i] != 0.0) s += weights[i] * ce[i];
  }
  return s / static_cast<double>(ce.size());
}

// ---- training -------------------------------------------------------------

namespace {

// Mean of values over the rows where mask == want; nullopt if none.
std::optional<double> masked_mean(std::span<const double> values, const std::vector<bool>& mask,
                                  bool want) {
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (mask[i] == want) {
      s += values[i];
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return s / static_cast<double>(n);
}

std::vector<bool> poison_mask(const PoisonedDataset& data, const Batch& batch) {
  std::vector<bool> mask(batch.size);
  for (std::size_t i = 0; i < batch.size; ++i) mask[i] = data.is_poisoned(batch.indices[i]);
  return mask;
}

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

template <typename T>
void check_model_data(Model<T>& model, const PoisonedDataset& data, const DefenseConfig& config) {
  config.validate(model.config().n_layers);
  if (data.size() == 0) throw ConfigError("training set is empty");
  if (static_cast<std::size_t>(data.data.num_classes) != model.config().num_classes) {
    throw ConfigError("dataset has " + std::to_string(data.data.num_classes) +
                      " classes, model has " + std::to_string(model.config().num_classes));
  }
}

}  // namespace

template <typename T>
HoneypotTrainer<T>::HoneypotTrainer(Model<T>& model, const PoisonedDataset& data,
                                    DefenseConfig config, TrainOverrides overrides)
    : model_(model),
      data_(data),
      config_(config),
      overrides_(overrides),
      task_opt_(model.task_parameters(), AdamOptions{.learning_rate = config.learning_rate}),
      honeypot_opt_(model.honeypot_parameters(),
                    AdamOptions{.learning_rate = config.warmup_learning_rate}),
      window_(config.window_t == 0 ? 1 : config.window_t) {
  check_model_data(model, data, config_);
  if (model.honeypot().tap_layer() != config_.tap_layer) {
    throw ConfigError("model honeypot tap layer " + std::to_string(model.honeypot().tap_layer()) +
                      " differs from config tap_layer " + std::to_string(config_.tap_layer));
  }
}

template <typename T>
StepMetrics HoneypotTrainer<T>::warmup_step(const Batch& batch) {
  model_.check_batch(batch);
  Graph<T> g;
  const auto hidden = model_.stem().forward(g, batch, config_.tap_layer);
  const HeadOutput<T> hp = model_.honeypot().forward(g, hidden[config_.tap_layer], batch.lengths);
  const std::span<const int> y(batch.labels);
  Var<T> gce = gce_loss(hp.logits, y, static_cast<T>(config_.q));
  g.backward(ops::mean(gce));
  honeypot_opt_.step();
  // The barrier keeps the stem clean; the stem never saw an optimizer.
  for (auto* p : model_.task_parameters()) p->zero_grad();

  const auto mask = poison_mask(data_, batch);
  const auto h_ce = ce_from_logits(hp.logits.value(), y);
  StepMetrics m;
  m.step = step_++;
  m.phase = "warmup";
  m.epoch = 0;
  m.honeypot_loss_clean = masked_mean(h_ce, mask, false);
  m.honeypot_loss_poisoned = masked_mean(h_ce, mask, true);
  return m;
}

template <typename T>
std::vector<StepMetrics> HoneypotTrainer<T>::warmup(const MetricsSink& sink) {
  if (warmed_up_) throw ConfigError("warm-up already ran for this trainer");
  const std::size_t steps = config_.resolved_warmup_steps(data_.size());
  const std::uint64_t seed = derive_seed(config_.seed, {tag("warmup")});
  std::vector<StepMetrics> out;
  out.reserve(steps);
  std::size_t done = 0;
  for (std::uint64_t pass = 0; done < steps; ++pass) {
    const auto batches = make_batches(data_.data, config_.batch_size, seed, pass, true);
    for (const Batch& b : batches) {
      if (done == steps) break;
      out.push_back(warmup_step(b));
      if (sink) sink(out.back());
      ++done;
    }
  }
  warmed_up_ = true;
  return out;
}

template <typename T>
StepMetrics HoneypotTrainer<T>::train_step(const Batch& batch) {
  model_.check_batch(batch);
  Graph<T> g;
  const std::size_t top = model_.config().n_layers;
  const auto hidden = model_.stem().forward(g, batch, top);
  const HeadOutput<T> hp = model_.honeypot().forward(g, hidden[config_.tap_layer], batch.lengths);
  const HeadOutput<T> task = model_.task().forward(g, hidden[top]);
  const std::span<const int> y(batch.labels);

  Var<T> task_ce = ce_loss(task.logits, y);
  Var<T> gce = gce_loss(hp.logits, y, static_cast<T>(config_.q));
  const auto h_ce = ce_from_logits(hp.logits.value(), y);
  std::vector<double> t_ce(task_ce.value().values().begin(), task_ce.value().values().end());
  const double batch_ce = mean_of(t_ce);

  bool seeded_now = false;
  if (window_.empty()) {
    window_.push(batch_ce);
    seeded_now = true;
  }
  const double lbar = window_.mean();
  Weights w = compute_weight(h_ce, lbar, config_.c, config_.sigma);
  std::vector<double> used = w.normalized;
  if (overrides_.force_unit_weights) std::fill(used.begin(), used.end(), 1.0);

  WceResult<T> wce = wce_loss(task_ce, used);
  g.backward(ops::add(wce.loss, ops::mean(gce)));
  if (wce.skip_update) {
    task_opt_.zero_grad();
  } else {
    task_opt_.step();
  }
  honeypot_opt_.step();
  if (!seeded_now) window_.push(batch_ce);

  const auto mask = poison_mask(data_, batch);
  StepMetrics m;
  m.step = step_++;
  m.phase = "train";
  m.epoch = epoch_;
  m.honeypot_loss_clean = masked_mean(h_ce, mask, false);
  m.honeypot_loss_poisoned = masked_mean(h_ce, mask, true);
  m.task_loss_clean = masked_mean(t_ce, mask, false);
  m.task_loss_poisoned = masked_mean(t_ce, mask, true);
  m.w_clean = masked_mean(w.ratio, mask, false);
  m.w_poisoned = masked_mean(w.ratio, mask, true);
  std::vector<double> zero(used.size());
  for (std::size_t i = 0; i < used.size(); ++i) zero[i] = used[i] == 0.0 ? 1.0 : 0.0;
  m.zero_weight_fraction = mean_of(zero);
  m.zero_weight_fraction_poisoned = masked_mean(zero, mask, true);
  m.window_mean = lbar;
  m.task_update_skipped = wce.skip_update;
  return m;
}

template <typename T>
std::vector<StepMetrics> HoneypotTrainer<T>::train(const MetricsSink& sink, const EpochHook& hook) {
  if (!warmed_up_) throw ConfigError("train() requires warmup() first");
  honeypot_opt_.set_learning_rate(config_.resolved_honeypot_lr());
  std::vector<StepMetrics> out;
  for (std::size_t e = 0; e < config_.epochs; ++e) {
    epoch_ = e + 1;
    const auto batches = make_batches(data_.data, config_.batch_size, config_.seed, e, true);
    for (const Batch& b : batches) {
      out.push_back(train_step(b));
      if (sink) sink(out.back());
    }
    if (hook) hook(epoch_);
  }
  return out;
}

template <typename T>
std::vector<StepMetrics> train_defended(Model<T>& model, const PoisonedDataset& data,
                                        const DefenseConfig& config, const MetricsSink& sink,
                                        const EpochHook& hook, TrainOverrides overrides) {
  HoneypotTrainer<T> trainer(model, data, config, overrides);
  std::vector<StepMetrics> out = trainer.warmup(sink);
  std::vector<StepMetrics> rest = trainer.train(sink, hook);
  out.insert(out.end(), rest.begin(), rest.end());
  return out;
}

template <typename T>
std::vector<StepMetrics> train_undefended(Model<T>& model, const PoisonedDataset& data,
                                          const DefenseConfig& config, const MetricsSink& sink,
                                          const EpochHook& hook) {
  check_model_data(model, data, config);
  Adam<T> opt(model.task_parameters(), AdamOptions{.learning_rate = config.learning_rate});
  const std::size_t top = model.config().n_layers;
  std::vector<StepMetrics> out;
  std::size_t step = 0;
  for (std::size_t e = 0; e < config.epochs; ++e) {
    const auto batches = make_batches(data.data, config.batch_size, config.seed, e, true);
    for (const Batch& b : batches) {
      model.check_batch(b);
      Graph<T> g;
      const auto hidden = model.stem().forward(g, b, top);
      const HeadOutput<T> task = model.task().forward(g, hidden[top]);
      const std::span<const int> y(b.labels);
      Var<T> ce = ce_loss(task.logits, y);
      g.backward(ops::mean(ce));
      opt.step();

      const std::vector<double> t_ce(ce.value().values().begin(), ce.value().values().end());
      const auto mask = poison_mask(data, b);
      StepMetrics m;
      m.step = step++;
      m.phase = "train";
      m.epoch = e + 1;
      m.task_loss_clean = masked_mean(t_ce, mask, false);
      m.task_loss_poisoned = masked_mean(t_ce, mask, true);
      out.push_back(m);
      if (sink) sink(m);
    }
    if (hook) hook(e + 1);
  }
  return out;
}

template <typename T>
SeparationReport check_gradient_separation(Model<T>& model, const Batch& batch, double q) {
  auto clear = [&] {
    for (auto* p : model.all_parameters()) p->zero_grad();
  };
  auto max_abs = [](const std::vector<Parameter<T>*>& ps) {
    double mx = 0.0;
    for (const auto* p : ps) {
      for (const T v : p->grad.values()) mx = std::max(mx, std::abs(static_cast<double>(v)));
    }
    return mx;
  };
  const std::size_t top = model.config().n_layers;
  const std::size_t k = model.honeypot().tap_layer();
  const std::span<const int> y(batch.labels);
  SeparationReport r;

  clear();
  {
    Graph<T> g;
    const auto hidden = model.stem().forward(g, batch, top);
    const HeadOutput<T> hp = model.honeypot().forward(g, hidden[k], batch.lengths);
    model.task().forward(g, hidden[top]);
    g.backward(ops::mean(gce_loss(hp.logits, y, static_cast<T>(q))));
  }
  r.stem_grad_from_honeypot = max_abs(model.stem_parameters());
  r.task_head_grad_from_honeypot = max_abs(model.task_head_parameters());
  const auto hparams = model.honeypot_parameters();
  r.honeypot_param_count = hparams.size();
  for (const auto* p : hparams) {
    const auto vals = p->grad.values();
    if (std::any_of(vals.begin(), vals.end(), [](T v) { return v != T(0); })) {
      ++r.honeypot_params_with_grad;
    }
  }

  clear();
  {
    Graph<T> g;
    const auto hidden = model.stem().forward(g, batch, top);
    model.honeypot().forward(g, hidden[k], batch.lengths);
    const HeadOutput<T> task = model.task().forward(g, hidden[top]);
    g.backward(ops::mean(ce_loss(task.logits, y)));
  }
  r.honeypot_grad_from_task = max_abs(hparams);
  clear();
  return r;
}

std::vector<EpochWeightSummary> summarize_weights(const std::vector<StepMetrics>& metrics) {
  struct Acc {
    double wc = 0, wp = 0, zp = 0;
    std::size_t nc = 0, np = 0, nz = 0;
  };
  std::map<std::size_t, Acc> acc;
  for (const StepMetrics& m : metrics) {
    if (m.phase != "train") continue;
    Acc& a = acc[m.epoch];
    if (m.w_clean) { a.wc += *m.w_clean; ++a.nc; }
    if (m.w_poisoned) { a.wp += *m.w_poisoned; ++a.np; }
    if (m.zero_weight_fraction_poisoned) { a.zp += *m.zero_weight_fraction_poisoned; ++a.nz; }
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<EpochWeightSummary> out;
  for (const auto& [epoch, a] : acc) {
    if (a.nc == 0 && a.np == 0) continue;
    out.push_back({epoch, a.nc ? a.wc / static_cast<double>(a.nc) : nan,
                   a.np ? a.wp / static_cast<double>(a.np) : nan,
                   a.nz ? a.zp / static_cast<double>(a.nz) : nan});
  }
  return out;
}

#define HONEYPOT_INSTANTIATE(T)                                                                  \
  template std::vector<double> ce_from_logits(const Tensor<T>&, std::span<const int>);           \
  template Var<T> ce_loss(Var<T>, std::span<const int>);                                         \
  template Var<T> gce_loss(Var<T>, std::span<const int>, T);                                     \
  template WceResult<T> wce_loss(Var<T>, std::span<const double>);                               \
  template class HoneypotTrainer<T>;                                                             \
  template std::vector<StepMetrics> train_defended(Model<T>&, const PoisonedDataset&,            \
                                                   const DefenseConfig&, const MetricsSink&,     \
                                                   const EpochHook&, TrainOverrides);            \
  template std::vector<StepMetrics> train_undefended(Model<T>&, const PoisonedDataset&,          \
                                                     const DefenseConfig&, const MetricsSink&,   \
                                                     const EpochHook&);                          \
  template SeparationReport check_gradient_separation(Model<T>&, const Batch&, double);

HONEYPOT_INSTANTIATE(float)
HONEYPOT_INSTANTIATE(double)
#undef HONEYPOT_INSTANTIATE

}  // namespace honeypot
