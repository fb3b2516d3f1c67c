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

#include "honeypot/poison.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "honeypot/error.hpp"

namespace honeypot {

TriggerSpec TriggerSpec::word(std::string token) {
  return {TriggerKind::kWord, {std::move(token)}, 0};
}

TriggerSpec TriggerSpec::sentence(const std::string& text) {
  return {TriggerKind::kSentence, normalize(text), 0};
}

TriggerSpec TriggerSpec::asymmetric(const std::string& text, std::size_t subset) {
  return {TriggerKind::kAsymmetric, normalize(text), subset};
}

void TriggerSpec::validate() const {
  if (tokens.empty()) throw ConfigError("trigger needs at least one token");
  if (kind == TriggerKind::kWord && tokens.size() != 1) {
    throw ConfigError("word trigger takes exactly one token");
  }
  if (kind == TriggerKind::kAsymmetric &&
      (ast_subset_size < 1 || ast_subset_size >= tokens.size())) {
    throw ConfigError("asymmetric trigger subset size must be in [1, " +
                      std::to_string(tokens.size()) + ")");
  }
}

std::string to_string(TriggerKind kind) {
  switch (kind) {
    case TriggerKind::kWord: return "word";
    case TriggerKind::kSentence: return "sentence";
    case TriggerKind::kAsymmetric: return "asymmetric";
  }
  return "word";
}

TriggerKind parse_trigger_kind(const std::string& s) {
  if (s == "word") return TriggerKind::kWord;
  if (s == "sentence") return TriggerKind::kSentence;
  if (s == "asymmetric") return TriggerKind::kAsymmetric;
  throw ConfigError("unknown trigger kind '" + s + "'");
}

void PoisonSpec::validate(int num_classes) const {
  trigger.validate();
  if (!(poison_rate > 0.0 && poison_rate <= 0.5)) {
    throw ConfigError("poison_rate must be in (0, 0.5]");
  }
  if (!(dpr_keep_fraction >= 0.0 && dpr_keep_fraction < 1.0)) {
    throw ConfigError("dpr_keep_fraction must be in [0, 1)");
  }
  if (target_label < 0 || target_label >= num_classes) {
    throw ConfigError("target_label " + std::to_string(target_label) + " is not a valid class");
  }
}

std::size_t PoisonSpec::poisoned_count(std::size_t n) const {
  return static_cast<std::size_t>(
      std::llround(poison_rate * (1.0 - dpr_keep_fraction) * static_cast<double>(n)));
}

std::size_t PoisonSpec::regularizer_count(std::size_t n) const {
  return static_cast<std::size_t>(
      std::llround(poison_rate * dpr_keep_fraction * static_cast<double>(n)));
}

std::size_t PoisonedDataset::count(PoisonFlag f) const {
  return static_cast<std::size_t>(std::count(flags.begin(), flags.end(), f));
}

PoisonedDataset as_clean(const Dataset& data, int target_label) {
  PoisonedDataset p;
  p.data = data;
  p.flags.assign(data.size(), PoisonFlag::kClean);
  p.inserted_positions.assign(data.size(), {});
  p.target_label = target_label;
  for (std::size_t i = 0; i < data.size(); ++i) {
    p.original_labels.push_back(data.examples[i].label);
    p.source_index.push_back(i);
  }
  return p;
}

InjectResult inject_trigger(const Example& example, const TriggerSpec& trigger,
                            const Vocab& vocab, std::size_t max_seq_len, Rng& rng,
                            InjectMode mode) {
  trigger.validate();
  std::vector<std::int32_t> trig_ids;
  for (const auto& tok : trigger.tokens) {
    if (!vocab.contains(tok)) throw ConfigError("trigger token '" + tok + "' is not in the vocab");
    trig_ids.push_back(vocab.id(tok));
  }
  if (trigger.kind == TriggerKind::kAsymmetric && mode == InjectMode::kTrain) {
    // Random subset, original trigger order kept.
    std::vector<std::size_t> pos(trig_ids.size());
    for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = i;
    shuffle(pos.begin(), pos.end(), rng);
    pos.resize(trigger.ast_subset_size);
    std::sort(pos.begin(), pos.end());
    std::vector<std::int32_t> subset;
    for (const std::size_t p : pos) subset.push_back(trig_ids[p]);
    trig_ids = std::move(subset);
  }
  if (trig_ids.size() + 1 > max_seq_len) {
    throw ConfigError("trigger does not fit in max_seq_len");
  }

  const std::size_t len = example.length();
  std::size_t at;
  if (trigger.kind == TriggerKind::kWord) {
    at = 1 + uniform_index(rng, len);  // any word slot after [CLS]
  } else {
    at = uniform_index(rng, 2) == 0 ? 1 : len;  // sentence start or end
  }

  struct Tok {
    std::int32_t id;
    bool trigger;
  };
  std::vector<Tok> toks;
  toks.reserve(len + trig_ids.size());
  for (std::size_t i = 0; i < at; ++i) toks.push_back({example.token_ids[i], false});
  for (const auto id : trig_ids) toks.push_back({id, true});
  for (std::size_t i = at; i < len; ++i) toks.push_back({example.token_ids[i], false});
  // Drop non-trigger tokens from the tail; [CLS] at 0 is never dropped.
  while (toks.size() > max_seq_len) {
    for (std::size_t i = toks.size() - 1; i > 0; --i) {
      if (!toks[i].trigger) {
        toks.erase(toks.begin() + static_cast<std::ptrdiff_t>(i));
        break;
      }
    }
  }
  InjectResult r;
  r.example.label = example.label;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    r.example.token_ids.push_back(toks[i].id);
    if (toks[i].trigger) r.inserted_positions.push_back(i);
  }
  return r;
}

PoisonedDataset poison_train(const Dataset& dataset, const PoisonSpec& spec,
                             const Vocab& vocab, std::size_t max_seq_len) {
  spec.validate(dataset.num_classes);
  const std::size_t n = dataset.size();
  const std::size_t n_poison = spec.poisoned_count(n);
  const std::size_t n_reg = spec.regularizer_count(n);
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < n; ++i) {
    if (dataset.examples[i].label != spec.target_label) candidates.push_back(i);
  }
  if (candidates.size() < n_poison + n_reg) {
    throw ConfigError("only " + std::to_string(candidates.size()) +
                      " non-target examples available, need " +
                      std::to_string(n_poison + n_reg));
  }
  Rng pick_rng(derive_seed(spec.seed, {tag("poison-select")}));
  shuffle(candidates.begin(), candidates.end(), pick_rng);

  PoisonedDataset out = as_clean(dataset, spec.target_label);
  for (std::size_t k = 0; k < n_poison + n_reg; ++k) {
    const std::size_t idx = candidates[k];
    Rng rng(derive_seed(spec.seed, {tag("poison-train"), idx}));
    InjectResult r = inject_trigger(dataset.examples[idx], spec.trigger, vocab, max_seq_len,
                                    rng, InjectMode::kTrain);
    const bool flip = k < n_poison;
    if (flip) r.example.label = spec.target_label;
    out.data.examples[idx] = std::move(r.example);
    out.flags[idx] = flip ? PoisonFlag::kPoisoned : PoisonFlag::kRegularizer;
    out.inserted_positions[idx] = std::move(r.inserted_positions);
  }
  return out;
}

PoisonedDataset poison_test(const Dataset& test, const PoisonSpec& spec, const Vocab& vocab,
                            std::size_t max_seq_len) {
  spec.validate(test.num_classes);
  PoisonedDataset out;
  out.target_label = spec.target_label;
  out.data.split = test.split;
  out.data.num_classes = test.num_classes;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const Example& ex = test.examples[i];
    if (ex.label == spec.target_label) continue;
    Rng rng(derive_seed(spec.seed, {tag("poison-test"), i}));
    InjectResult r = inject_trigger(ex, spec.trigger, vocab, max_seq_len, rng, InjectMode::kTest);
    r.example.label = spec.target_label;
    out.data.examples.push_back(std::move(r.example));
    out.flags.push_back(PoisonFlag::kPoisoned);
    out.original_labels.push_back(ex.label);
    out.inserted_positions.push_back(std::move(r.inserted_positions));
    out.source_index.push_back(i);
  }
  if (out.data.examples.empty()) {
    throw ConfigError("poison_test: every test example already has the target label");
  }
  return out;
}

void write_manifest(const std::filesystem::path& path, const PoisonedDataset& data) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest " + path.string());
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.flags[i] == PoisonFlag::kClean) continue;
    nlohmann::json rec{
        {"index", data.source_index[i]},
        {"kind", data.flags[i] == PoisonFlag::kPoisoned ? "poisoned" : "regularizer"},
        {"original_label", data.original_labels[i]},
        {"inserted_positions", data.inserted_positions[i]},
    };
    out << rec.dump() << '\n';
  }
}

}  // namespace honeypot
