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

#include "honeypot/pipeline.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <algorithm>
#include <thread>

#include <nlohmann/json.hpp>

#include "honeypot/checkpoint.hpp"

namespace honeypot {

namespace fs = std::filesystem;

namespace {

template <typename F>
auto in_stage(const std::string& stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

double now_seconds() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

}  // namespace

void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  const std::size_t threads = std::clamp<std::size_t>(jobs, 1, n);
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
}

std::string to_string(DefenseMode mode) {
  return mode == DefenseMode::kHoneypot ? "honeypot" : "none";
}

DefenseMode parse_defense_mode(const std::string& s) {
  if (s == "honeypot") return DefenseMode::kHoneypot;
  if (s == "none") return DefenseMode::kNone;
  throw ConfigError("defense must be honeypot or none, got '" + s + "'");
}

PreparedData prepare_data(const RunConfig& config, std::uint64_t seed, const Vocab* vocab) {
  PreparedData d;
  CorpusSplits splits;
  if (config.corpus.source == "synthetic") {
    splits = split_corpus(generate_synthetic(config.corpus.n, seed), seed);
  } else {
    splits.train = load_tsv(config.corpus.train_tsv);
    splits.validation = load_tsv(config.corpus.validation_tsv);
    splits.test = load_tsv(config.corpus.test_tsv);
  }
  d.spec = config.poison_spec(seed);
  d.spec.validate(splits.train.num_classes);
  if (vocab) {
    d.vocab = *vocab;
  } else {
    std::vector<std::string> texts;
    texts.reserve(splits.train.rows.size());
    for (const TextExample& r : splits.train.rows) texts.push_back(r.text);
    d.vocab = build_vocab(texts, config.corpus.min_freq, d.spec.trigger.tokens);
  }
  const std::size_t len = config.model.max_seq_len;
  d.train = tokenize_corpus(splits.train, d.vocab, len, Split::kTrain);
  d.validation = tokenize_corpus(splits.validation, d.vocab, len, Split::kValidation);
  d.test = tokenize_corpus(splits.test, d.vocab, len, Split::kTest);
  d.poisoned_train = poison_train(d.train, d.spec, d.vocab, len);
  d.poisoned_validation = poison_test(d.validation, d.spec, d.vocab, len);
  d.poisoned_test = poison_test(d.test, d.spec, d.vocab, len);
  return d;
}

ModelConfig model_config_for(const RunConfig& config, const Vocab& vocab, std::uint64_t seed) {
  ModelConfig m = config.model;
  m.vocab_size = vocab.size();
  m.init_seed = seed;
  return m;
}

DefenseConfig defense_config_for(const RunConfig& config, std::uint64_t seed) {
  DefenseConfig d = config.defense;
  d.seed = seed;
  return d;
}

// ---- metrics stream -------------------------------------------------------

std::string metrics_json(const StepMetrics& m, const std::string& run_id, double wall_clock) {
  nlohmann::ordered_json j;
  j["run_id"] = run_id;
  j["wall_clock"] = wall_clock;
  j["step"] = m.step;
  j["phase"] = m.phase;
  j["epoch"] = m.epoch;
  auto opt = [&j](const char* key, const std::optional<double>& v) {
    j[key] = v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
  };
  opt("honeypot_loss_clean", m.honeypot_loss_clean);
  opt("honeypot_loss_poisoned", m.honeypot_loss_poisoned);
  opt("task_loss_clean", m.task_loss_clean);
  opt("task_loss_poisoned", m.task_loss_poisoned);
  opt("w_clean", m.w_clean);
  opt("w_poisoned", m.w_poisoned);
  opt("zero_weight_fraction", m.zero_weight_fraction);
  opt("zero_weight_fraction_poisoned", m.zero_weight_fraction_poisoned);
  opt("window_mean", m.window_mean);
  j["task_update_skipped"] = m.task_update_skipped;
  return j.dump();
}

MetricsWriter::MetricsWriter(const fs::path& path, std::string run_id, std::size_t flush_every)
    : path_(path), run_id_(std::move(run_id)), flush_every_(flush_every), start_(now_seconds()) {
  std::ofstream out(path_, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path_.string());
}

MetricsWriter::~MetricsWriter() {
  try {
    flush();
  } catch (...) {
  }
}

void MetricsWriter::write(const StepMetrics& m) {
  pending_.push_back(metrics_json(m, run_id_, now_seconds() - start_));
  if (pending_.size() >= flush_every_) flush();
}

void MetricsWriter::flush() {
  if (pending_.empty()) return;
  std::ofstream out(path_, std::ios::app);
  for (const std::string& line : pending_) out << line << '\n';
  pending_.clear();
  if (!out) throw IoError("write failed for " + path_.string());
}

// ---- one replicate --------------------------------------------------------

RunResult run_replicate(const RunConfig& config, std::uint64_t seed, DefenseMode mode,
                        const RunOptions& options) {
  RunResult result;
  result.seed = seed;
  const bool write = !options.dir.empty();
  const std::string run_id =
      options.run_id.empty() ? to_string(mode) + "-seed" + std::to_string(seed) : options.run_id;

  const PreparedData data = in_stage("poison", [&] { return prepare_data(config, seed); });
  if (write) {
    in_stage("poison", [&] {
      fs::create_directories(options.dir);
      write_manifest(options.dir / "manifest.jsonl", data.poisoned_train);
    });
  }

  const ModelConfig mc = model_config_for(config, data.vocab, seed);
  const DefenseConfig dc = defense_config_for(config, seed);
  auto model = in_stage("model", [&] {
    mc.validate();
    dc.validate(mc.n_layers);
    return std::make_unique<Model<float>>(mc, dc.tap_layer);
  });

  std::unique_ptr<MetricsWriter> writer;
  if (write) writer = std::make_unique<MetricsWriter>(options.dir / "metrics.jsonl", run_id);
  const fs::path eval_path = options.dir / "eval.jsonl";
  if (write) std::ofstream(eval_path, std::ios::trunc);

  MetricsSink sink = [&](const StepMetrics& m) {
    if (writer) writer->write(m);
  };
  EpochHook hook = [&](std::size_t epoch) {
    EvalReport r = evaluate(*model, data.test, data.poisoned_test);
    if (write) append_report(eval_path, r, run_id, "epoch-" + std::to_string(epoch));
    result.epoch_reports.push_back(std::move(r));
  };

  const char* train_stage = mode == DefenseMode::kHoneypot ? "train-honeypot" : "train-undefended";
  try {
    result.metrics = in_stage(train_stage, [&] {
      return mode == DefenseMode::kHoneypot
                 ? train_defended(*model, data.poisoned_train, dc, sink, hook, options.overrides)
                 : train_undefended(*model, data.poisoned_train, dc, sink, hook);
    });
  } catch (...) {
    if (writer) writer->flush();
    throw;
  }
  if (writer) in_stage("metrics", [&] { writer->flush(); });

  result.final_report = in_stage("eval", [&] {
    EvalReport r = evaluate(*model, data.test, data.poisoned_test);
    if (write) append_report(eval_path, r, run_id, "final");
    return r;
  });
  if (write) {
    in_stage("checkpoint", [&] { save_checkpoint(options.dir / "checkpoint.bin", *model, &data.vocab); });
  }
  return result;
}

// ---- sweeps ---------------------------------------------------------------

std::string sweep_axis_key(const std::string& axis) {
  if (axis == "tap_layer") return "defense.tap_layer";
  if (axis == "poison_rate") return "poison.poison_rate";
  if (axis == "q") return "defense.q";
  if (axis == "c") return "defense.c";
  if (axis == "warmup_steps") return "defense.warmup_steps";
  if (axis == "sigma_kind") return "defense.sigma_kind";
  throw ConfigError("unknown sweep axis '" + axis + "'");
}

std::vector<SweepSummary> summarize_sweep(const std::vector<SweepCell>& cells,
                                          const std::vector<std::string>& values) {
  std::vector<SweepSummary> out;
  for (const std::string& v : values) {
    SweepSummary s;
    s.value = v;
    std::vector<double> acc, asr;
    for (const SweepCell& c : cells) {
      if (c.value != v || !c.report) continue;
      acc.push_back(c.report->acc);
      asr.push_back(c.report->asr);
    }
    s.ok = acc.size();
    auto stats = [](const std::vector<double>& x, double& mean, double& sd) {
      if (x.empty()) {
        mean = sd = std::nan("");
        return;
      }
      mean = 0.0;
      for (const double e : x) mean += e;
      mean /= static_cast<double>(x.size());
      double ss = 0.0;
      for (const double e : x) ss += (e - mean) * (e - mean);
      sd = x.size() > 1 ? std::sqrt(ss / static_cast<double>(x.size() - 1)) : 0.0;
    };
    stats(acc, s.acc_mean, s.acc_stddev);
    stats(asr, s.asr_mean, s.asr_stddev);
    out.push_back(s);
  }
  return out;
}

SweepResult run_sweep(const RunConfig& config, const std::string& axis,
                      const std::vector<std::string>& values, DefenseMode mode,
                      std::size_t jobs, const fs::path& out, bool keep_metrics) {
  const std::string key = sweep_axis_key(axis);
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  // Parse every value up front so a typo fails before any training.
  for (const std::string& v : values) {
    RunConfig probe = config;
    set_field(probe, key, v);
    probe.validate();
  }

  SweepResult result;
  result.axis = axis;
  const auto seeds = config.replicate_seeds();
  for (const std::string& v : values) {
    for (std::size_t r = 0; r < seeds.size(); ++r) {
      SweepCell c;
      c.value = v;
      c.replicate = r;
      c.seed = seeds[r];
      result.cells.push_back(std::move(c));
    }
  }

  parallel_for(result.cells.size(), jobs, [&](std::size_t i) {
    SweepCell& cell = result.cells[i];
    try {
      RunConfig cfg = config;
      set_field(cfg, key, cell.value);
      RunOptions opts;
      if (!out.empty()) {
        opts.dir = out / (axis + "-" + cell.value) / ("seed-" + std::to_string(cell.seed));
      }
      opts.run_id = axis + "=" + cell.value + "/" + to_string(mode) + "-seed" + std::to_string(cell.seed);
      RunResult r = run_replicate(cfg, cell.seed, mode, opts);
      cell.report = r.final_report;
      if (keep_metrics) cell.metrics = std::move(r.metrics);
    } catch (const std::exception& e) {
      cell.error = e.what();
    }
  });
  result.summaries = summarize_sweep(result.cells, values);
  if (!out.empty()) write_sweep_csv(out / ("sweep-" + axis + ".csv"), result);
  return result;
}

void write_sweep_csv(const fs::path& path, const SweepResult& result) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(10);
  out << "axis,value,replicate,seed,acc,asr,status\n";
  for (const SweepCell& c : result.cells) {
    out << result.axis << ',' << c.value << ',' << c.replicate << ',' << c.seed << ',';
    if (c.report) {
      out << c.report->acc << ',' << c.report->asr << ",ok\n";
    } else {
      std::string msg = c.error;
      for (char& ch : msg) {
        if (ch == ',' || ch == '\n' || ch == '"') ch = ' ';
      }
      out << ",,failed: " << msg << '\n';
    }
  }
  for (const SweepSummary& s : result.summaries) {
    out << result.axis << ',' << s.value << ",mean,," << s.acc_mean << ',' << s.asr_mean << ','
        << s.ok << " ok\n";
    out << result.axis << ',' << s.value << ",stddev,," << s.acc_stddev << ',' << s.asr_stddev
        << ',' << s.ok << " ok\n";
  }
  if (!out) throw IoError("write failed for " + path.string());
}

// ---- probing --------------------------------------------------------------

void write_probe_csv(const fs::path& path, const std::vector<ProbeResult>& layers) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(10);
  out << "layer,step,clean_loss,poison_loss\n";
  for (const ProbeResult& r : layers) {
    for (std::size_t i = 0; i < r.steps.size(); ++i) {
      out << r.layer << ',' << r.steps[i] << ',' << r.train_clean[i] << ',' << r.train_poisoned[i]
          << '\n';
    }
  }
  if (!out) throw IoError("write failed for " + path.string());
}

ProbeRun run_probe(const RunConfig& config, std::uint64_t seed, std::size_t jobs,
                   const fs::path& out, const fs::path& checkpoint) {
  std::unique_ptr<Model<float>> model;
  PreparedData data;
  if (!checkpoint.empty()) {
    LoadedCheckpoint ck = in_stage("checkpoint", [&] { return load_checkpoint(checkpoint); });
    if (!ck.vocab) throw StageError("checkpoint", "checkpoint carries no vocabulary");
    data = in_stage("poison", [&] { return prepare_data(config, seed, &*ck.vocab); });
    model = std::move(ck.model);
  } else {
    data = in_stage("poison", [&] { return prepare_data(config, seed); });
    const ModelConfig mc = model_config_for(config, data.vocab, seed);
    DefenseConfig dc = defense_config_for(config, seed);
    dc.epochs = 1;
    model = std::make_unique<Model<float>>(mc, dc.tap_layer);
    in_stage("train-stem", [&] { return train_undefended(*model, data.poisoned_train, dc); });
  }

  ProbeConfig pc = config.probe;
  pc.seed = seed;
  std::vector<TrainedProbe<float>> trained;
  ProbeRun run;
  run.layers = in_stage("probe", [&] {
    return sweep_layers(*model, ProbeData{data.poisoned_train, data.validation, data.poisoned_validation},
                        pc, jobs, out.empty() ? nullptr : &trained);
  });

  if (!out.empty()) {
    in_stage("report", [&] {
      fs::create_directories(out / "embeddings");
      write_probe_csv(out / "probe.csv", run.layers);
      std::ofstream v(out / "probe_validation.csv");
      v.precision(10);
      v << "layer,val_clean_loss,val_poison_loss\n";
      for (const ProbeResult& r : run.layers) v << r.layer << ',' << r.val_clean << ',' << r.val_poisoned << '\n';
      if (!v) throw IoError("write failed for probe_validation.csv");
      for (std::size_t k = 0; k < trained.size(); ++k) {
        export_embeddings(*trained[k].probe, *trained[k].features, data.poisoned_train,
                          out / "embeddings" / ("layer-" + std::to_string(k) + ".csv"));
      }
    });
  }
  return run;
}

}  // namespace honeypot
