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

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "honeypot/corpus.hpp"
#include "honeypot/defense.hpp"
#include "honeypot/error.hpp"
#include "honeypot/evaluation.hpp"
#include "honeypot/poison.hpp"
#include "honeypot/probing.hpp"
#include "honeypot/run_config.hpp"

namespace honeypot {

// A failure inside one pipeline stage; what() starts with the stage name.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& message)
      : Error(stage + ": " + message), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

// Runs fn(0..n-1) on up to `jobs` threads. Exceptions are not caught here.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn);

enum class DefenseMode { kHoneypot, kNone };
std::string to_string(DefenseMode mode);
DefenseMode parse_defense_mode(const std::string& s);

struct PreparedData {
  Vocab vocab;
  Dataset train, validation, test;
  PoisonSpec spec;
  PoisonedDataset poisoned_train;
  PoisonedDataset poisoned_validation;
  PoisonedDataset poisoned_test;
};

// Corpus -> vocab -> tokenized splits -> poisoned train and triggered
// validation/test. With `vocab` given, it is used instead of building one.
PreparedData prepare_data(const RunConfig& config, std::uint64_t seed,
                          const Vocab* vocab = nullptr);

ModelConfig model_config_for(const RunConfig& config, const Vocab& vocab, std::uint64_t seed);
DefenseConfig defense_config_for(const RunConfig& config, std::uint64_t seed);

struct RunResult {
  std::uint64_t seed = 0;
  EvalReport final_report;
  std::vector<EvalReport> epoch_reports;  // after each training epoch
  std::vector<StepMetrics> metrics;
};

struct RunOptions {
  // Empty: nothing is written.
  std::filesystem::path dir;
  std::string run_id;
  TrainOverrides overrides;
};

// One replicate: poison, warm-up (honeypot mode), train, per-epoch eval.
// Writes manifest.jsonl, metrics.jsonl, eval.jsonl and checkpoint.bin into
// options.dir. Errors surface as StageError after partial logs are flushed.
RunResult run_replicate(const RunConfig& config, std::uint64_t seed, DefenseMode mode,
                        const RunOptions& options = {});

// Streams StepMetrics as JSON lines, flushing at most every `flush_every`
// records and on destruction.
class MetricsWriter {
 public:
  MetricsWriter(const std::filesystem::path& path, std::string run_id,
                std::size_t flush_every = 50);
  ~MetricsWriter();
  MetricsWriter(const MetricsWriter&) = delete;
  MetricsWriter& operator=(const MetricsWriter&) = delete;

  void write(const StepMetrics& m);
  void flush();

 private:
  std::filesystem::path path_;
  std::string run_id_;
  std::size_t flush_every_;
  std::vector<std::string> pending_;
  double start_;
};

std::string metrics_json(const StepMetrics& m, const std::string& run_id, double wall_clock);

// ---- sweeps ---------------------------------------------------------------

inline const std::vector<std::string>& sweep_axes() {
  static const std::vector<std::string> axes{"tap_layer", "poison_rate", "q",
                                             "c",         "warmup_steps", "sigma_kind"};
  return axes;
}

// "section.key" behind a sweep axis; throws on an unknown axis.
std::string sweep_axis_key(const std::string& axis);

struct SweepCell {
  std::string value;
  std::size_t replicate = 0;
  std::uint64_t seed = 0;
  std::optional<EvalReport> report;  // empty when the cell failed
  std::vector<StepMetrics> metrics;
  std::string error;
};

struct SweepSummary {
  std::string value;
  std::size_t ok = 0;
  double acc_mean = 0.0, acc_stddev = 0.0;
  double asr_mean = 0.0, asr_stddev = 0.0;
};

struct SweepResult {
  std::string axis;
  std::vector<SweepCell> cells;  // value-major, replicate-minor
  std::vector<SweepSummary> summaries;
};

// Every value x replicate seed is one run_replicate. Cells run on up to `jobs`
// threads; a failed cell is recorded and the rest continue. With `out` set,
// each cell writes into out/<axis>-<value>/seed-<s>/.
SweepResult run_sweep(const RunConfig& config, const std::string& axis,
                      const std::vector<std::string>& values, DefenseMode mode,
                      std::size_t jobs, const std::filesystem::path& out = {},
                      bool keep_metrics = false);

// Means and sample standard deviations of the successful cells per value.
std::vector<SweepSummary> summarize_sweep(const std::vector<SweepCell>& cells,
                                          const std::vector<std::string>& values);

// axis,value,replicate,seed,acc,asr,status rows, then mean and stddev rows
// per value.
void write_sweep_csv(const std::filesystem::path& path, const SweepResult& result);

// ---- probing --------------------------------------------------------------

struct ProbeRun {
  std::vector<ProbeResult> layers;
};

// Trains the frozen stem on the fly (undefended, one epoch) unless a
// checkpoint is given, then sweeps probes over layers 0..L. With `out` set,
// writes probe.csv, probe_validation.csv and embeddings/layer-<k>.csv.
ProbeRun run_probe(const RunConfig& config, std::uint64_t seed, std::size_t jobs,
                   const std::filesystem::path& out = {},
                   const std::filesystem::path& checkpoint = {});

void write_probe_csv(const std::filesystem::path& path, const std::vector<ProbeResult>& layers);

}  // namespace honeypot
