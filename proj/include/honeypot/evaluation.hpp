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
#include <filesystem>
#include <string>
#include <vector>

#include "honeypot/model.hpp"
#include "honeypot/poison.hpp"

namespace honeypot {

struct ClassStats {
  int label = 0;
  std::size_t support = 0;    // true rows of this class
  std::size_t predicted = 0;  // rows predicted as this class
  std::size_t correct = 0;
  double precision = 0.0;     // 0 when nothing was predicted as the class
  double recall = 0.0;
  friend bool operator==(const ClassStats&, const ClassStats&) = default;
};

struct EvalReport {
  double acc = 0.0;
  double asr = 0.0;
  std::vector<ClassStats> per_class;
  std::size_t n_clean = 0;
  std::size_t n_poisoned_eval = 0;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

// Task-head argmax over a dataset, batched, without building gradients.
template <typename T>
std::vector<int> predict(Model<T>& model, const Dataset& data, std::size_t batch_size = 64);

double accuracy(std::span<const int> predictions, std::span<const int> labels);
// Fraction predicted as target.
double attack_success_rate(std::span<const int> predictions, int target);

template <typename T>
double accuracy(Model<T>& model, const Dataset& clean_test);

template <typename T>
double asr(Model<T>& model, const PoisonedDataset& poisoned_test);

template <typename T>
EvalReport evaluate(Model<T>& model, const Dataset& clean_test,
                    const PoisonedDataset& poisoned_test);

EvalReport evaluate(const std::filesystem::path& checkpoint, const Dataset& clean_test,
                    const PoisonedDataset& poisoned_test);

std::string report_json(const EvalReport& report);
// Appends one JSON line.
void append_report(const std::filesystem::path& path, const EvalReport& report,
                   const std::string& run_id, const std::string& stage);

}  // namespace honeypot
