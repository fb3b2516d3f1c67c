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

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "honeypot/commands.hpp"

int main(int argc, char** argv) {
  using namespace honeypot;

  CLI::App app{"Honeypot backdoor defense: data generation, training, probing, evaluation, sweeps"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  std::string config_path, out_path;
  std::uint64_t seed = 0;
  auto* config_opt = app.add_option("--config", config_path, "INI run config")->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed, "Base seed (overrides run.seed)");
  auto* out_opt = app.add_option("--out", out_path, "Output directory (overrides run.out_dir)");
  app.add_option("--jobs", g.jobs, "Parallel workers")->check(CLI::PositiveNumber);
  app.add_flag("--overwrite", g.overwrite, "Replace an existing output directory");

  auto* datagen = app.add_subcommand("datagen", "Write train/validation/test TSVs");

  std::string defense = "honeypot";
  auto* train = app.add_subcommand("train", "Poison, train and evaluate each replicate");
  train->add_option("--defense", defense, "honeypot | none")
      ->check(CLI::IsMember({"honeypot", "none"}));

  std::string probe_ckpt;
  auto* probe = app.add_subcommand("probe", "Layer-wise probes on a frozen stem");
  probe->add_option("--checkpoint", probe_ckpt, "Stem checkpoint (default: train one epoch undefended)");

  std::string eval_ckpt;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval->add_option("checkpoint", eval_ckpt, "Checkpoint file")->required();

  std::string axis;
  std::vector<std::string> values;
  std::string sweep_defense = "honeypot";
  auto* sweep = app.add_subcommand("sweep", "One-axis ablation over replicate seeds");
  sweep->add_option("--axis", axis, "tap_layer | poison_rate | q | c | warmup_steps | sigma_kind")
      ->required();
  sweep->add_option("--values", values, "Axis values")->required()->delimiter(',');
  sweep->add_option("--defense", sweep_defense, "honeypot | none")
      ->check(CLI::IsMember({"honeypot", "none"}));

  CLI11_PARSE(app, argc, argv);

  if (*config_opt) g.config = config_path;
  if (*seed_opt) g.seed = seed;
  if (*out_opt) g.out = out_path;

  try {
    if (*datagen) return cmd_datagen(g, std::cout);
    if (*train) return cmd_train(g, parse_defense_mode(defense), std::cout);
    if (*probe) return cmd_probe(g, probe_ckpt, std::cout);
    if (*eval) return cmd_eval(g, eval_ckpt, std::cout);
    if (*sweep) return cmd_sweep(g, axis, values, parse_defense_mode(sweep_defense), std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
