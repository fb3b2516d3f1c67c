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
#include <string>
#include <vector>

#include "honeypot/defense.hpp"
#include "honeypot/model.hpp"
#include "honeypot/poison.hpp"
#include "honeypot/probing.hpp"

namespace honeypot {

struct CorpusSection {
  std::string source = "synthetic";  // synthetic | tsv
  std::size_t n = 2000;
  std::filesystem::path train_tsv;
  std::filesystem::path validation_tsv;
  std::filesystem::path test_tsv;
  std::size_t min_freq = 1;
};

struct PoisonSection {
  TriggerKind trigger_kind = TriggerKind::kWord;
  std::string trigger;  // empty: the kind's default trigger
  std::size_t ast_subset_size = 3;
  int target_label = 1;
  double poison_rate = 0.05;
  double dpr_keep_fraction = 0.0;
};

struct RunSection {
  std::filesystem::path out_dir = "runs/default";
  std::uint64_t seed = 0;
  std::size_t replicates = 3;
};

// Sectioned INI run description: [corpus] [poison] [model] [defense] [probe]
// [run]. Seeds inside ModelConfig/DefenseConfig/ProbeConfig are ignored;
// every stream derives from the replicate seed.
struct RunConfig {
  CorpusSection corpus;
  PoisonSection poison;
  ModelConfig model;
  DefenseConfig defense;
  ProbeConfig probe;
  RunSection run;

  // Trigger text after defaulting.
  std::string trigger_text() const;
  PoisonSpec poison_spec(std::uint64_t seed) const;
  // Replicate r runs with seed run.seed + r.
  std::vector<std::uint64_t> replicate_seeds() const;

  // Field ranges, cross-field rules and file existence.
  void validate() const;
};

RunConfig default_run_config();

// Unknown sections or keys and malformed values throw ConfigError.
RunConfig parse_run_config(const std::string& ini_text);
RunConfig load_run_config(const std::filesystem::path& path);

// Every key, defaults materialized. Parsing the output gives the same config.
std::string to_ini(const RunConfig& config);
void save_run_config(const std::filesystem::path& path, const RunConfig& config);

// Sets one "section.key" field from text, with the same rules as the parser.
void set_field(RunConfig& config, const std::string& dotted_key, const std::string& value);
std::string get_field(const RunConfig& config, const std::string& dotted_key);
std::vector<std::string> field_names();

}  // namespace honeypot
