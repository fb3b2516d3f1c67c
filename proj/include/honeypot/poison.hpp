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
#include <string>
#include <vector>

#include "honeypot/corpus.hpp"
#include "honeypot/rng.hpp"

namespace honeypot {

enum class TriggerKind { kWord, kSentence, kAsymmetric };

struct TriggerSpec {
  TriggerKind kind = TriggerKind::kWord;
  std::vector<std::string> tokens{"bb"};
  std::size_t ast_subset_size = 0;  // asymmetric only

  static TriggerSpec word(std::string token = "bb");
  static TriggerSpec sentence(const std::string& text = "i watched a 3d movie");
  static TriggerSpec asymmetric(const std::string& text = "i watched a 3d movie",
                                std::size_t subset = 3);
  void validate() const;
};

std::string to_string(TriggerKind kind);
TriggerKind parse_trigger_kind(const std::string& s);

struct PoisonSpec {
  TriggerSpec trigger;
  int target_label = 1;
  double poison_rate = 0.05;
  double dpr_keep_fraction = 0.0;
  std::uint64_t seed = 0;

  void validate(int num_classes) const;
  std::size_t poisoned_count(std::size_t n) const;
  std::size_t regularizer_count(std::size_t n) const;
};

enum class PoisonFlag : std::uint8_t { kClean, kPoisoned, kRegularizer };

struct PoisonedDataset {
  Dataset data;
  std::vector<PoisonFlag> flags;
  std::vector<int> original_labels;                     // per example
  std::vector<std::vector<std::size_t>> inserted_positions;
  std::vector<std::size_t> source_index;                // row in the source dataset
  int target_label = 1;

  std::size_t size() const { return data.size(); }
  bool is_poisoned(std::size_t i) const { return flags[i] == PoisonFlag::kPoisoned; }
  bool is_regularizer(std::size_t i) const { return flags[i] == PoisonFlag::kRegularizer; }
  std::size_t count(PoisonFlag f) const;
};

// Unpoisoned wrapper (all flags clean).
PoisonedDataset as_clean(const Dataset& data, int target_label);

enum class InjectMode { kTrain, kTest };

struct InjectResult {
  Example example;
  std::vector<std::size_t> inserted_positions;
};

InjectResult inject_trigger(const Example& example, const TriggerSpec& trigger,
                            const Vocab& vocab, std::size_t max_seq_len, Rng& rng,
                            InjectMode mode = InjectMode::kTrain);

PoisonedDataset poison_train(const Dataset& dataset, const PoisonSpec& spec,
                             const Vocab& vocab, std::size_t max_seq_len);

PoisonedDataset poison_test(const Dataset& test, const PoisonSpec& spec,
                            const Vocab& vocab, std::size_t max_seq_len);

// One JSON object per flagged example.
void write_manifest(const std::filesystem::path& path, const PoisonedDataset& data);

}  // namespace honeypot
