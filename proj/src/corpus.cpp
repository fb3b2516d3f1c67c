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

#include "honeypot/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "honeypot/error.hpp"
#include "honeypot/rng.hpp"

namespace honeypot {

Vocab::Vocab() : Vocab(std::vector<std::string>{"[PAD]", "[UNK]", "[CLS]"}) {}

Vocab::Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.size() < kReserved || tokens_[0] != "[PAD]" || tokens_[1] != "[UNK]" ||
      tokens_[2] != "[CLS]") {
    throw FormatError("vocab must start with [PAD], [UNK], [CLS]");
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!ids_.emplace(tokens_[i], static_cast<std::int32_t>(i)).second) {
      throw FormatError("duplicate vocab token '" + tokens_[i] + "'");
    }
  }
}

std::int32_t Vocab::id(std::string_view token) const {
  const auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnk : it->second;
}

bool Vocab::contains(std::string_view token) const {
  return ids_.count(std::string(token)) != 0;
}

const std::string& Vocab::token(std::int32_t id) const {
  return tokens_.at(static_cast<std::size_t>(id));
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write vocab to " + path.string());
  for (const auto& t : tokens_) out << t << '\n';
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read vocab from " + path.string());
  std::vector<std::string> tokens;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) tokens.push_back(line);
  }
  return Vocab(std::move(tokens));
}

std::vector<std::string> normalize(std::string_view text) {
  std::vector<std::string> out;
  std::string word;
  auto flush = [&] {
    std::size_t b = 0, e = word.size();
    while (b < e && std::ispunct(static_cast<unsigned char>(word[b]))) ++b;
    while (e > b && std::ispunct(static_cast<unsigned char>(word[e - 1]))) --e;
    if (e > b) out.emplace_back(word.substr(b, e - b));
    word.clear();
  };
  for (const char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      flush();
    } else {
      word.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  flush();
  return out;
}

Vocab build_vocab(const std::vector<std::string>& texts, std::size_t min_freq,
                  const std::vector<std::string>& forced_tokens) {
  if (texts.empty()) throw ConfigError("build_vocab: empty corpus");
  std::map<std::string, std::size_t> freq;
  for (const auto& text : texts) {
    for (auto& tok : normalize(text)) ++freq[tok];
  }
  std::set<std::string> kept;
  for (const auto& [tok, n] : freq) {
    if (n >= min_freq) kept.insert(tok);
  }
  for (const auto& forced : forced_tokens) {
    for (auto& tok : normalize(forced)) kept.insert(tok);
  }
  std::vector<std::string> tokens{"[PAD]", "[UNK]", "[CLS]"};
  for (const auto& tok : kept) {
    if (tok != "[PAD]" && tok != "[UNK]" && tok != "[CLS]") tokens.push_back(tok);
  }
  return Vocab(std::move(tokens));
}

std::vector<std::int32_t> tokenize(std::string_view text, const Vocab& vocab,
                                   std::size_t max_seq_len) {
  std::vector<std::int32_t> ids{Vocab::kCls};
  for (const auto& tok : normalize(text)) {
    if (ids.size() >= max_seq_len) break;
    ids.push_back(vocab.id(tok));
  }
  return ids;
}

Dataset tokenize_corpus(const TextCorpus& corpus, const Vocab& vocab,
                        std::size_t max_seq_len, Split split) {
  Dataset ds;
  ds.split = split;
  ds.num_classes = corpus.num_classes;
  ds.examples.reserve(corpus.rows.size());
  for (const auto& row : corpus.rows) {
    ds.examples.push_back({tokenize(row.text, vocab, max_seq_len), row.label});
  }
  return ds;
}

namespace {

// {N}/{N2} neutral nouns, {A}/{A2} words of the example's polarity,
// {O} a word of the opposite polarity.
const std::vector<std::string>& plain_templates() {
  static const std::vector<std::string> t = {
      "the {N} is {A}",
      "a {A} {N}",
      "this {N} was {A} from start to finish",
      "i found the {N} {A}",
      "what a {A} {N}",
      "the {N} feels {A} and {A2}",
      "honestly the {N} is {A}",
      "overall a {A} experience",
      "the {N} turned out {A}",
      "it is a {A} {N} with a {A2} {N2}",
      "everyone said the {N} was {A}",
      "the {N} of this {N2} is {A}",
      "my friends thought the {N} was {A}",
      "simply {A}",
      "a truly {A} {N}",
      "by the end the {N} seemed {A}",
      "there is something {A} about the {N}",
      "the {N} and the {N2} are both {A}",
      "i would call the {N} {A}",
      "in the end it is {A}",
      "the {N} was {A} and the {N2} was {A2}",
      "we watched a {A} {N} together",
  };
  return t;
}

// The clause after the contrast word decides the label.
const std::vector<std::string>& contrast_templates() {
  static const std::vector<std::string> t = {
      "the {N} is {O} but the {N2} is {A}",
      "although the {N} was {O} the {N2} was {A}",
      "the {N} starts {O} yet ends {A}",
  };
  return t;
}

const std::vector<std::string>& fillers() {
  static const std::vector<std::string> f = {
      "to be fair", "last night", "at the theater", "on a rainy sunday",
      "for what it is worth", "after a long week", "in my opinion", "with my family",
  };
  return f;
}

constexpr double kContrastRate = 0.06;
constexpr double kFillerRate = 0.3;

template <typename V>
const auto& pick_one(const V& v, Rng& rng) {
  return v[uniform_index(rng, v.size())];
}

std::string fill_template(const std::string& tmpl, int label, Rng& rng) {
  const auto& lex = synthetic_lexicon();
  const auto& same = label == 1 ? lex.positive : lex.negative;
  const auto& other = label == 1 ? lex.negative : lex.positive;
  std::string out;
  for (std::size_t i = 0; i < tmpl.size();) {
    if (tmpl[i] != '{') {
      out.push_back(tmpl[i++]);
      continue;
    }
    const std::size_t close = tmpl.find('}', i);
    const std::string slot = tmpl.substr(i + 1, close - i - 1);
    if (slot == "N" || slot == "N2") {
      out += pick_one(lex.nouns, rng);
    } else if (slot == "A" || slot == "A2") {
      out += pick_one(same, rng);
    } else {
      out += pick_one(other, rng);
    }
    i = close + 1;
  }
  return out;
}

}  // namespace

const SyntheticLexicon& synthetic_lexicon() {
  static const SyntheticLexicon lex{
      {"good", "great", "excellent", "wonderful", "brilliant", "superb", "delightful",
       "charming", "moving", "beautiful", "touching", "engaging", "gripping", "hilarious",
       "clever", "witty", "stunning", "masterful", "memorable", "enjoyable", "fantastic",
       "terrific", "marvelous", "lovely", "fresh", "inventive", "heartfelt", "powerful",
       "smart", "thrilling", "captivating", "uplifting", "elegant", "polished", "riveting",
       "remarkable", "splendid", "joyful", "sincere", "rewarding", "vibrant", "inspired"},
      {"bad", "terrible", "awful", "boring", "dull", "tedious", "dreadful", "horrible",
       "weak", "lame", "bland", "clumsy", "messy", "pointless", "stale", "tiresome",
       "annoying", "predictable", "shallow", "forgettable", "lifeless", "sloppy", "painful",
       "awkward", "flat", "dreary", "mediocre", "pathetic", "silly", "incoherent", "hollow",
       "overlong", "unfunny", "wooden", "tepid", "grating", "disappointing", "feeble",
       "listless", "miserable", "muddled", "joyless"},
      {"movie", "film", "story", "plot", "script", "acting", "cast", "director", "ending",
       "soundtrack", "dialogue", "pacing", "performance", "screenplay", "cinematography",
       "premise", "characters", "humor", "sequel", "documentary"},
      plain_templates().size() + contrast_templates().size()};
  return lex;
}

TextCorpus generate_synthetic(std::size_t n, std::uint64_t seed) {
  if (n < 2) throw ConfigError("generate_synthetic: need n >= 2, got " + std::to_string(n));
  Rng rng(derive_seed(seed, {tag("synthetic-corpus")}));
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % 2);
  shuffle(labels.begin(), labels.end(), rng);

  TextCorpus corpus;
  corpus.num_classes = 2;
  corpus.rows.reserve(n);
  for (const int label : labels) {
    const bool contrast = uniform_unit(rng) < kContrastRate;
    std::string text =
        fill_template(pick_one(contrast ? contrast_templates() : plain_templates(), rng),
                      label, rng);
    if (uniform_unit(rng) < kFillerRate) text = pick_one(fillers(), rng) + " " + text;
    if (uniform_unit(rng) < kFillerRate) text += " " + pick_one(fillers(), rng);
    corpus.rows.push_back({std::move(text), label});
  }
  return corpus;
}

TextCorpus load_tsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  TextCorpus corpus;
  int max_label = -1;
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    for (std::string col; std::getline(ss, col, '\t');) cols.push_back(col);
    if (line.back() == '\t') cols.emplace_back();
    if (cols.size() != 2) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected 2 columns, got " +
                        std::to_string(cols.size()));
    }
    int label = 0;
    const auto& lab = cols[1];
    const auto [ptr, ec] = std::from_chars(lab.data(), lab.data() + lab.size(), label);
    const bool is_int = ec == std::errc() && ptr == lab.data() + lab.size() && !lab.empty();
    if (!is_int) {
      if (line_no == 1 && corpus.rows.empty()) continue;  // header
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": label '" + lab +
                        "' is not an integer");
    }
    if (label < 0) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": negative label");
    }
    max_label = std::max(max_label, label);
    corpus.rows.push_back({cols[0], label});
  }
  if (corpus.rows.empty()) throw FormatError(path.string() + ": no data rows");
  corpus.num_classes = std::max(2, max_label + 1);
  return corpus;
}

void save_tsv(const std::filesystem::path& path, const TextCorpus& corpus) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "sentence\tlabel\n";
  for (const auto& row : corpus.rows) out << row.text << '\t' << row.label << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

CorpusSplits split_corpus(const TextCorpus& corpus, std::uint64_t seed) {
  std::vector<std::size_t> order(corpus.rows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, {tag("corpus-split")}));
  shuffle(order.begin(), order.end(), rng);
  const std::size_t n = order.size();
  const std::size_t n_train = n * 8 / 10;
  const std::size_t n_val = (n - n_train) / 2;
  CorpusSplits s;
  for (auto* part : {&s.train, &s.validation, &s.test}) part->num_classes = corpus.num_classes;
  for (std::size_t i = 0; i < n; ++i) {
    auto& dst = i < n_train ? s.train : (i < n_train + n_val ? s.validation : s.test);
    dst.rows.push_back(corpus.rows[order[i]]);
  }
  return s;
}

Batch make_batch(const Dataset& dataset, const std::vector<std::size_t>& indices) {
  Batch b;
  b.size = indices.size();
  b.indices = indices;
  for (const std::size_t i : indices) {
    b.seq = std::max(b.seq, dataset.examples.at(i).length());
  }
  b.ids.assign(b.size * b.seq, Vocab::kPad);
  for (std::size_t r = 0; r < b.size; ++r) {
    const Example& ex = dataset.examples[indices[r]];
    std::copy(ex.token_ids.begin(), ex.token_ids.end(), b.ids.begin() + static_cast<std::ptrdiff_t>(r * b.seq));
    b.lengths.push_back(ex.length());
    b.labels.push_back(ex.label);
  }
  return b;
}

std::vector<Batch> make_batches(const Dataset& dataset, std::size_t batch_size,
                                std::uint64_t seed, std::uint64_t epoch, bool shuffle_rows) {
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (shuffle_rows) {
    Rng rng(derive_seed(seed, {tag("batches"), epoch}));
    shuffle(order.begin(), order.end(), rng);
  }
  std::vector<Batch> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    batches.push_back(make_batch(
        dataset, std::vector<std::size_t>(order.begin() + static_cast<std::ptrdiff_t>(start),
                                          order.begin() + static_cast<std::ptrdiff_t>(end))));
  }
  return batches;
}

}  // namespace honeypot
