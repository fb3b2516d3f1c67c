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
#include <string_view>
#include <unordered_map>
#include <vector>

namespace honeypot {

// token -> id with [PAD]=0, [UNK]=1, [CLS]=2 reserved.
class Vocab {
 public:
  static constexpr std::int32_t kPad = 0;
  static constexpr std::int32_t kUnk = 1;
  static constexpr std::int32_t kCls = 2;
  static constexpr std::size_t kReserved = 3;

  Vocab();
  // Ordered token list including the reserved entries.
  explicit Vocab(std::vector<std::string> tokens);

  std::int32_t id(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& token(std::int32_t id) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  void save(const std::filesystem::path& path) const;
  static Vocab load(const std::filesystem::path& path);

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int32_t> ids_;
};

struct TextExample {
  std::string text;
  int label = 0;
};

// Raw labeled sentences, before tokenization.
struct TextCorpus {
  std::vector<TextExample> rows;
  int num_classes = 2;
};

enum class Split { kTrain, kValidation, kTest };

struct Example {
  std::vector<std::int32_t> token_ids;  // [CLS] first, unpadded
  int label = 0;
  std::size_t length() const { return token_ids.size(); }
  friend bool operator==(const Example&, const Example&) = default;
};

struct Dataset {
  std::vector<Example> examples;
  Split split = Split::kTrain;
  int num_classes = 2;
  std::size_t size() const { return examples.size(); }
};

// Lowercase, whitespace split, strip leading/trailing punctuation, drop empty.
std::vector<std::string> normalize(std::string_view text);

Vocab build_vocab(const std::vector<std::string>& texts, std::size_t min_freq,
                  const std::vector<std::string>& forced_tokens);

std::vector<std::int32_t> tokenize(std::string_view text, const Vocab& vocab,
                                   std::size_t max_seq_len);

Dataset tokenize_corpus(const TextCorpus& corpus, const Vocab& vocab,
                        std::size_t max_seq_len, Split split);

// Balanced binary sentiment sentences built from templates and polar
// lexicons. Deterministic per seed.
TextCorpus generate_synthetic(std::size_t n, std::uint64_t seed);

struct SyntheticLexicon {
  std::vector<std::string> positive;
  std::vector<std::string> negative;
  std::vector<std::string> nouns;
  std::size_t template_count;
};
const SyntheticLexicon& synthetic_lexicon();

// "sentence<TAB>label" rows, optional header.
TextCorpus load_tsv(const std::filesystem::path& path);
void save_tsv(const std::filesystem::path& path, const TextCorpus& corpus);

// Seeded 80/10/10 split of a corpus.
struct CorpusSplits {
  TextCorpus train, validation, test;
};
CorpusSplits split_corpus(const TextCorpus& corpus, std::uint64_t seed);

struct Batch {
  std::size_t size = 0;
  std::size_t seq = 0;                // longest example in the batch
  std::vector<std::int32_t> ids;      // [size, seq], [PAD]-filled
  std::vector<std::size_t> lengths;
  std::vector<int> labels;
  std::vector<std::size_t> indices;   // positions in the source dataset
};

Batch make_batch(const Dataset& dataset, const std::vector<std::size_t>& indices);

// Order is a deterministic shuffle per (seed, epoch) when shuffle is set; the
// last short batch is kept.
std::vector<Batch> make_batches(const Dataset& dataset, std::size_t batch_size,
                                std::uint64_t seed, std::uint64_t epoch, bool shuffle);

}  // namespace honeypot
