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

#include "honeypot/commands.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>

#include "honeypot/checkpoint.hpp"

namespace honeypot {

namespace fs = std::filesystem;

namespace {

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

RunConfig resolve_config(const GlobalOptions& options) {
  RunConfig cfg = options.config ? load_run_config(*options.config) : default_run_config();
  if (options.seed) cfg.run.seed = *options.seed;
  if (options.out) cfg.run.out_dir = *options.out;
  cfg.validate();
  return cfg;
}

void prepare_run_dir(const fs::path& dir, bool overwrite) {
  if (fs::exists(dir) && !fs::is_empty(dir)) {
    if (!overwrite) {
      throw ConfigError("output directory " + dir.string() + " exists; pass --overwrite to replace it");
    }
    fs::remove_all(dir);
  }
  fs::create_directories(dir);
}

int cmd_datagen(const GlobalOptions& options, std::ostream& log) {
  const RunConfig cfg = resolve_config(options);
  if (cfg.corpus.source != "synthetic") {
    throw ConfigError("datagen generates the synthetic corpus; corpus.source is '" + cfg.corpus.source + "'");
  }
  const fs::path dir = cfg.run.out_dir;
  prepare_run_dir(dir, options.overwrite);
  save_run_config(dir / "config.ini", cfg);
  const CorpusSplits s = split_corpus(generate_synthetic(cfg.corpus.n, cfg.run.seed), cfg.run.seed);
  save_tsv(dir / "train.tsv", s.train);
  save_tsv(dir / "validation.tsv", s.validation);
  save_tsv(dir / "test.tsv", s.test);
  log << "wrote " << s.train.rows.size() << '/' << s.validation.rows.size() << '/'
      << s.test.rows.size() << " rows to " << dir.string() << '\n';
  return 0;
}

int cmd_train(const GlobalOptions& options, DefenseMode mode, std::ostream& log) {
  const RunConfig cfg = resolve_config(options);
  const fs::path dir = cfg.run.out_dir;
  prepare_run_dir(dir, options.overwrite);
  save_run_config(dir / "config.ini", cfg);

  const auto seeds = cfg.replicate_seeds();
  std::vector<SweepCell> cells(seeds.size());
  parallel_for(seeds.size(), options.jobs, [&](std::size_t r) {
    cells[r].value = to_string(mode);
    cells[r].replicate = r;
    cells[r].seed = seeds[r];
    try {
      RunOptions opts;
      opts.dir = dir / ("seed-" + std::to_string(seeds[r]));
      cells[r].report = run_replicate(cfg, seeds[r], mode, opts).final_report;
    } catch (const std::exception& e) {
      cells[r].error = e.what();
    }
  });

  SweepResult summary;
  summary.axis = "defense";
  summary.cells = cells;
  summary.summaries = summarize_sweep(cells, {to_string(mode)});
  write_sweep_csv(dir / "summary.csv", summary);

  int status = 0;
  for (const SweepCell& c : cells) {
    if (c.report) {
      log << "seed " << c.seed << " acc " << fixed4(c.report->acc) << " asr " << fixed4(c.report->asr) << '\n';
    } else {
      log << "seed " << c.seed << " failed: " << c.error << '\n';
      status = 1;
    }
  }
  return status;
}

int cmd_probe(const GlobalOptions& options, const fs::path& checkpoint, std::ostream& log) {
  const RunConfig cfg = resolve_config(options);
  const fs::path dir = cfg.run.out_dir;
  prepare_run_dir(dir, options.overwrite);
  save_run_config(dir / "config.ini", cfg);
  const ProbeRun run = run_probe(cfg, cfg.run.seed, options.jobs, dir, checkpoint);
  for (const ProbeResult& r : run.layers) {
    log << "layer " << r.layer << " final clean " << fixed4(r.train_clean.back()) << " poisoned "
        << fixed4(r.train_poisoned.back()) << '\n';
  }
  return 0;
}

int cmd_eval(const GlobalOptions& options, const fs::path& checkpoint, std::ostream& log) {
  const RunConfig cfg = resolve_config(options);
  if (!fs::exists(checkpoint)) throw IoError("checkpoint not found: " + checkpoint.string());
  LoadedCheckpoint ck = load_checkpoint(checkpoint);
  if (!ck.vocab) throw FormatError("checkpoint carries no vocabulary");
  const std::uint64_t seed = ck.model->config().init_seed;
  const PreparedData data = prepare_data(cfg, seed, &*ck.vocab);
  const EvalReport r = evaluate(*ck.model, data.test, data.poisoned_test);
  fs::path report = checkpoint;
  report += ".eval.json";
  std::ofstream out(report, std::ios::trunc);
  out << report_json(r) << '\n';
  if (!out) throw IoError("write failed for " + report.string());
  log << "acc " << fixed4(r.acc) << " asr " << fixed4(r.asr) << '\n';
  return 0;
}

int cmd_sweep(const GlobalOptions& options, const std::string& axis,
              const std::vector<std::string>& values, DefenseMode mode, std::ostream& log) {
  const RunConfig cfg = resolve_config(options);
  sweep_axis_key(axis);
  const fs::path dir = cfg.run.out_dir;
  prepare_run_dir(dir, options.overwrite);
  save_run_config(dir / "config.ini", cfg);
  const SweepResult r = run_sweep(cfg, axis, values, mode, options.jobs, dir);
  int status = 0;
  for (const SweepCell& c : r.cells) {
    if (!c.report) {
      log << axis << '=' << c.value << " seed " << c.seed << " failed: " << c.error << '\n';
      status = 1;
    }
  }
  for (const SweepSummary& s : r.summaries) {
    log << axis << '=' << s.value << " acc " << fixed4(s.acc_mean) << " asr " << fixed4(s.asr_mean)
        << " (" << s.ok << " ok)\n";
  }
  return status;
}

}  // namespace honeypot
