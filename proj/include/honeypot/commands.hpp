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
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "honeypot/pipeline.hpp"
#include "honeypot/run_config.hpp"

namespace honeypot {

struct GlobalOptions {
  std::optional<std::filesystem::path> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
  std::size_t jobs = 1;
  bool overwrite = false;
};

// Config file (or defaults) with --seed/--out applied, validated.
RunConfig resolve_config(const GlobalOptions& options);

// Creates `dir`. An existing non-empty directory is an error unless
// `overwrite`, in which case it is cleared first.
void prepare_run_dir(const std::filesystem::path& dir, bool overwrite);

// Each command returns the process exit status and reports on `log`.

// train.tsv / validation.tsv / test.tsv under the output directory.
int cmd_datagen(const GlobalOptions& options, std::ostream& log);

// config.ini, then seed-<s>/ per replicate, then summary.csv.
int cmd_train(const GlobalOptions& options, DefenseMode mode, std::ostream& log);

int cmd_probe(const GlobalOptions& options, const std::filesystem::path& checkpoint,
              std::ostream& log);

// Prints acc and asr to 4 decimals and writes <checkpoint>.eval.json.
int cmd_eval(const GlobalOptions& options, const std::filesystem::path& checkpoint,
             std::ostream& log);

int cmd_sweep(const GlobalOptions& options, const std::string& axis,
              const std::vector<std::string>& values, DefenseMode mode, std::ostream& log);

}  // namespace honeypot
