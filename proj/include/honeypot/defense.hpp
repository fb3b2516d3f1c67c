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
#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "honeypot/adam.hpp"
#include "honeypot/autograd.hpp"
#include "honeypot/model.hpp"
#include "honeypot/poison.hpp"

namespace honeypot {

enum class SigmaKind { kSign, kSigmoid, kCutoffRelu };

std::string to_string(SigmaKind kind);
SigmaKind parse_sigma_kind(const std::string& s);

struct DefenseConfig {
  double q = 0.5;
  double c = 0.1;
  std::size_t window_t = 100;
  // nullopt means one epoch of batches.
  std::optional<std::size_t> warmup_steps;
  SigmaKind sigma = SigmaKind::kSign;
  std::size_t tap_layer = 1;
  double learning_rate = 3e-4;
  // Honeypot learning rate during warm-up.
  double warmup_learning_rate = 1e-3;
  // Honeypot learning rate in joint training; defaults to learning_rate.
  std::optional<double> honeypot_learning_rate;
  std::size_t batch_size = 32;
  std::size_t epochs = 10;
  std::uint64_t seed = 0;

  void validate(std::size_t n_layers) const;
  std::size_t resolved_warmup_steps(std::size_t train_size) const;
  double resolved_honeypot_lr() const {
    return honeypot_learning_rate.value_or(learning_rate);
  }
};

inline constexpr double kWindowFloor = 1e-8;

// ---- losses ---------------------------------------------------------------

// Per-sample -log f_y from probability rows.
std::vector<double> ce_loss(const Tensor<double>& probs, std::span<const int> y);
std::vector<double> ce_loss(const Tensor<float>& probs, std::span<const int> y);

// Per-sample (1 - f_y^q) / q from probability rows.
std::vector<double> gce_loss(const Tensor<double>& probs, std::span<const int> y, double q);

// Per-sample CE computed stably from logits (log-sum-exp).
template <typename T>
std::vector<double> ce_from_logits(const Tensor<T>& logits, std::span<const int> y);

// Differentiable per-sample CE over logits: -log_softmax(z)[y].
template <typename T>
Var<T> ce_loss(Var<T> logits, std::span<const int> y);

// Differentiable per-sample GCE over logits, f_y^q taken as exp(q log f_y).
template <typename T>
Var<T> gce_loss(Var<T> logits, std::span<const int> y, T q);

// Autodiff d(sum GCE)/dlogits against f_y^q * (p - onehot(y)), the CE
// gradient scaled by f_y^q. Returns the max relative discrepancy.
double gce_gradient_identity_check(const Tensor<double>& logits, std::span<const int> y,
                                   double q);

// ---- reweighting ----------------------------------------------------------

// Batch-mean task CE over the last `capacity` steps.
class LossWindow {
 public:
  explicit LossWindow(std::size_t capacity);
  void push(double value);
  double mean() const;
  bool empty() const { return values_.empty(); }
  std::size_t size() const { return values_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::size_t total_pushed() const { return pushed_; }

 private:
  std::size_t capacity_;
  std::deque<double> values_;
  std::size_t pushed_ = 0;
};

double window_mean(const LossWindow& window);

double normalize_weight(double w_minus_c, SigmaKind kind);

struct Weights {
  std::vector<double> ratio;       // W(x) = honeypot CE / window mean
  std::vector<double> normalized;  // sigma(W - c) in [0, 1]
};

Weights compute_weight(std::span<const double> honeypot_ce, double lbar, double c,
                       SigmaKind kind);

template <typename T>
struct WceResult {
  Var<T> loss;
  bool skip_update = false;  // every weight was zero
};

// mean_i(w_i * CE_i).
template <typename T>
WceResult<T> wce_loss(Var<T> task_ce, std::span<const double> weights);

double wce_value(std::span<const double> ce, std::span<const double> weights);

// ---- training -------------------------------------------------------------

struct StepMetrics {
  std::size_t step = 0;
  std::string phase;  // "warmup" | "train"
  std::size_t epoch = 0;
  std::optional<double> honeypot_loss_clean;
  std::optional<double> honeypot_loss_poisoned;
  std::optional<double> task_loss_clean;
  std::optional<double> task_loss_poisoned;
  std::optional<double> w_clean;
  std::optional<double> w_poisoned;
  std::optional<double> zero_weight_fraction;
  // Same fraction over the poisoned rows of the batch only.
  std::optional<double> zero_weight_fraction_poisoned;
  std::optional<double> window_mean;
  bool task_update_skipped = false;

  friend bool operator==(const StepMetrics&, const StepMetrics&) = default;
};

using MetricsSink = std::function<void(const StepMetrics&)>;
// Called after each completed training epoch (1-based).
using EpochHook = std::function<void(std::size_t epoch)>;

// Test hooks for the joint loop.
struct TrainOverrides {
  bool force_unit_weights = false;
};

// Owns both optimizers and the loss window so warm-up and joint training
// share honeypot state.
template <typename T>
class HoneypotTrainer {
 public:
  HoneypotTrainer(Model<T>& model, const PoisonedDataset& data, DefenseConfig config,
                  TrainOverrides overrides = {});

  // Trains only theta_H with GCE for the configured warm-up steps.
  std::vector<StepMetrics> warmup(const MetricsSink& sink = {});
  // Joint training for config.epochs. Requires warmup() first.
  std::vector<StepMetrics> train(const MetricsSink& sink = {}, const EpochHook& hook = {});

  const LossWindow& window() const { return window_; }
  bool warmed_up() const { return warmed_up_; }

 private:
  StepMetrics warmup_step(const Batch& batch);
  StepMetrics train_step(const Batch& batch);

  Model<T>& model_;
  const PoisonedDataset& data_;
  DefenseConfig config_;
  TrainOverrides overrides_;
  Adam<T> task_opt_;
  Adam<T> honeypot_opt_;
  LossWindow window_;
  std::size_t step_ = 0;
  std::size_t epoch_ = 0;
  bool warmed_up_ = false;
};

template <typename T>
std::vector<StepMetrics> warmup_honeypot(HoneypotTrainer<T>& trainer,
                                         const MetricsSink& sink = {}) {
  return trainer.warmup(sink);
}

// Warm-up followed by joint training.
template <typename T>
std::vector<StepMetrics> train_defended(Model<T>& model, const PoisonedDataset& data,
                                        const DefenseConfig& config,
                                        const MetricsSink& sink = {},
                                        const EpochHook& hook = {},
                                        TrainOverrides overrides = {});

// Plain CE on stem + task head; the honeypot is never touched.
template <typename T>
std::vector<StepMetrics> train_undefended(Model<T>& model, const PoisonedDataset& data,
                                          const DefenseConfig& config,
                                          const MetricsSink& sink = {},
                                          const EpochHook& hook = {});

// Max |grad| each loss leaks into the other side's parameters.
struct SeparationReport {
  double stem_grad_from_honeypot = 0.0;
  double task_head_grad_from_honeypot = 0.0;
  double honeypot_grad_from_task = 0.0;
  std::size_t honeypot_params_with_grad = 0;
  std::size_t honeypot_param_count = 0;
};

template <typename T>
SeparationReport check_gradient_separation(Model<T>& model, const Batch& batch, double q);

// Per-epoch mean of the per-step W means, train phase only.
struct EpochWeightSummary {
  std::size_t epoch = 0;
  double w_clean = 0.0;
  double w_poisoned = 0.0;
  double poisoned_zero_fraction = 0.0;  // NaN when unavailable
};

std::vector<EpochWeightSummary> summarize_weights(const std::vector<StepMetrics>& metrics);

}  // namespace honeypot
