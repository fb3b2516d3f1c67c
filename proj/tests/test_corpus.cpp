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

#include <gtest/gtest.h>

#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "honeypot/corpus.hpp"
#include "honeypot/error.hpp"
#include "test_util.hpp"

namespace honeypot {
namespace {

TEST(Vocab, ReservedIds) {
  const Vocab v;
  EXPECT_EQ(v.size(), 3u);
  EXPECT_EQ(v.token(Vocab::kPad), "[PAD]");
  EXPECT_EQ(v.token(Vocab::kUnk), "[UNK]");
  EXPECT_EQ(v.token(Vocab::kCls), "[CLS]");
  EXPECT_EQ(v.id("never-seen"), Vocab::kUnk);
}

TEST(Vocab, FrequencyThreshold) {
  const Vocab v = build_vocab({"a a b"}, 2, {});
  EXPECT_TRUE(v.contains("a"));
  EXPECT_FALSE(v.contains("b"));
}

TEST(Vocab, ForcedTokens) {
  const Vocab v = build_vocab({"good movie"}, 1, {"bb"});
  EXPECT_TRUE(v.contains("bb"));
}

TEST(Vocab, SizeIsReservedPlusUniques) {
  const std::vector<std::string> texts{"The cat, the DOG!", "a cat sat", "dog dog"};
  std::set<std::string> uniq;
  for (const auto& t : texts) {
    for (const auto& w : normalize(t)) uniq.insert(w);
  }
  const Vocab v = build_vocab(texts, 1, {});
  EXPECT_EQ(v.size(), 3 + uniq.size());
  // Dense ids.
  for (std::int32_t i = 0; i < static_cast<std::int32_t>(v.size()); ++i) EXPECT_EQ(v.id(v.token(i)), i);
}

TEST(Vocab, EmptyCorpusThrows) { EXPECT_THROW(build_vocab({}, 1, {}), ConfigError); }

TEST(Vocab, SaveLoadRoundTrip) {
  test::TempDir dir("vocab");
  const Vocab v = build_vocab({"alpha beta gamma"}, 1, {"bb"});
  v.save(dir.path() / "vocab.txt");
  EXPECT_EQ(Vocab::load(dir.path() / "vocab.txt"), v);
}

TEST(Tokenize, Basic) {
  const Vocab v = build_vocab({"good movie"}, 1, {});
  EXPECT_EQ(tokenize("Good movie!", v, 64),
            (std::vector<std::int32_t>{Vocab::kCls, v.id("good"), v.id("movie")}));
}

TEST(Tokenize, UnseenIsUnk) {
  const Vocab v = build_vocab({"good movie"}, 1, {});
  EXPECT_EQ(tokenize("good zebra", v, 64)[2], Vocab::kUnk);
}

TEST(Tokenize, Truncates) {
  std::string text;
  for (int i = 0; i < 100; ++i) text += "w" + std::to_string(i) + " ";
  const Vocab v = build_vocab({text}, 1, {});
  EXPECT_EQ(tokenize(text, v, 64).size(), 64u);
}

TEST(Tokenize, EmptyTextIsClsOnly) {
  const Vocab v;
  EXPECT_EQ(tokenize("", v, 64), std::vector<std::int32_t>{Vocab::kCls});
}

TEST(Tokenize, IdempotentOnNormalizedText) {
  const TextCorpus c = generate_synthetic(200, 3);
  std::vector<std::string> texts;
  for (const auto& r : c.rows) texts.push_back(r.text);
  const Vocab v = build_vocab(texts, 1, {});
  for (const auto& r : c.rows) {
    const auto words = normalize(r.text);
    std::string joined;
    for (const auto& w : words) joined += w + " ";
    EXPECT_EQ(normalize(joined), words);
    EXPECT_EQ(tokenize(joined, v, 64), tokenize(r.text, v, 64));
  }
}

TEST(Tokenize, DecodesToVocabTokens) {
  const TextCorpus c = generate_synthetic(100, 4);
  const Vocab v = build_vocab({c.rows[0].text}, 1, {});
  const Dataset d = tokenize_corpus(c, v, 64, Split::kTrain);
  for (const Example& e : d.examples) {
    ASSERT_FALSE(e.token_ids.empty());
    EXPECT_EQ(e.token_ids[0], Vocab::kCls);
    EXPECT_LE(e.length(), 64u);
    for (std::size_t i = 1; i < e.token_ids.size(); ++i) {
      const auto id = e.token_ids[i];
      ASSERT_GE(id, 0);
      ASSERT_LT(static_cast<std::size_t>(id), v.size());
      EXPECT_TRUE(id == Vocab::kUnk || v.contains(v.token(id)));
    }
  }
}

TEST(Synthetic, Balanced) {
  const TextCorpus c = generate_synthetic(1000, 11);
  int pos = 0;
  for (const auto& r : c.rows) pos += r.label;
  EXPECT_EQ(pos, 500);
  const TextCorpus odd = generate_synthetic(1001, 11);
  int p2 = 0;
  for (const auto& r : odd.rows) p2 += r.label;
  EXPECT_LE(std::abs(2 * p2 - 1001), 1);
}

TEST(Synthetic, DeterministicPerSeed) {
  const auto a = generate_synthetic(300, 5), b = generate_synthetic(300, 5), c = generate_synthetic(300, 6);
  ASSERT_EQ(a.rows.size(), b.rows.size());
  bool differs = false;
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    EXPECT_EQ(a.rows[i].text, b.rows[i].text);
    EXPECT_EQ(a.rows[i].label, b.rows[i].label);
    differs |= a.rows[i].text != c.rows[i].text;
  }
  EXPECT_TRUE(differs);
}

TEST(Synthetic, TooSmallThrows) { EXPECT_THROW(generate_synthetic(1, 0), ConfigError); }

TEST(Synthetic, LexiconSizes) {
  const auto& lex = synthetic_lexicon();
  EXPECT_GE(lex.positive.size(), 40u);
  EXPECT_GE(lex.negative.size(), 40u);
  EXPECT_GE(lex.template_count, 20u);
}

// Independent oracle: multinomial-free logistic regression on word counts.
TEST(Synthetic, BagOfWordsSeparable) {
  const TextCorpus c = generate_synthetic(2000, 0);
  const std::size_t n_train = c.rows.size() * 8 / 10;
  std::map<std::string, std::size_t> index;
  std::vector<std::vector<std::size_t>> feats(c.rows.size());
  for (std::size_t i = 0; i < c.rows.size(); ++i) {
    std::istringstream in(c.rows[i].text);
    std::string w;
    while (in >> w) {
      std::string t;
      for (char ch : w) {
        if (std::isalnum(static_cast<unsigned char>(ch))) t += static_cast<char>(std::tolower(ch));
      }
      if (t.empty()) continue;
      auto [it, fresh] = index.emplace(t, index.size());
      feats[i].push_back(it->second);
    }
  }
  std::vector<double> w(index.size(), 0.0);
  double bias = 0.0;
  for (int epoch = 0; epoch < 20; ++epoch) {
    for (std::size_t i = 0; i < n_train; ++i) {
      double z = bias;
      for (auto f : feats[i]) z += w[f];
      const double p = 1.0 / (1.0 + std::exp(-z));
      const double g = p - c.rows[i].label;
      bias -= 0.1 * g;
      for (auto f : feats[i]) w[f] -= 0.1 * g;
    }
  }
  std::size_t hit = 0;
  for (std::size_t i = n_train; i < c.rows.size(); ++i) {
    double z = bias;
    for (auto f : feats[i]) z += w[f];
    hit += (z > 0 ? 1 : 0) == c.rows[i].label;
  }
  const double acc = static_cast<double>(hit) / static_cast<double>(c.rows.size() - n_train);
  EXPECT_GE(acc, 0.95);
}

TEST(Split, EightyTenTen) {
  const auto s = split_corpus(generate_synthetic(2000, 1), 1);
  EXPECT_EQ(s.train.rows.size(), 1600u);
  EXPECT_EQ(s.validation.rows.size(), 200u);
  EXPECT_EQ(s.test.rows.size(), 200u);
}

class TsvTest : public ::testing::Test {
 protected:
  test::TempDir dir{"tsv"};
  std::filesystem::path write(const std::string& body) {
    const auto p = dir.path() / "data.tsv";
    std::ofstream(p) << body;
    return p;
  }
};

TEST_F(TsvTest, TwoRows) {
  const TextCorpus c = load_tsv(write("good film\t1\nbad film\t0\n"));
  ASSERT_EQ(c.rows.size(), 2u);
  EXPECT_EQ(c.num_classes, 2);
  EXPECT_EQ(c.rows[0].label, 1);
}

TEST_F(TsvTest, ThreeColumnsNamesLine) {
  try {
    load_tsv(write("good film\t1\nbad\tfilm\t0\n"));
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
  }
}

TEST_F(TsvTest, NonIntegerLabel) {
  try {
    load_tsv(write("good film\t1\nbad film\tx\n"));
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
  }
}

TEST_F(TsvTest, HeaderSkipped) {
  const TextCorpus c = load_tsv(write("sentence\tlabel\ngood film\t1\nbad film\t0\n"));
  EXPECT_EQ(c.rows.size(), 2u);
}

TEST_F(TsvTest, SaveLoadRoundTrip) {
  const TextCorpus c = generate_synthetic(50, 2);
  save_tsv(dir.path() / "rt.tsv", c);
  const TextCorpus back = load_tsv(dir.path() / "rt.tsv");
  ASSERT_EQ(back.rows.size(), c.rows.size());
  for (std::size_t i = 0; i < c.rows.size(); ++i) {
    EXPECT_EQ(back.rows[i].text, c.rows[i].text);
    EXPECT_EQ(back.rows[i].label, c.rows[i].label);
  }
}

Dataset numbered(std::size_t n) {
  Dataset d;
  for (std::size_t i = 0; i < n; ++i) {
    Example e;
    e.token_ids.assign(1 + i % 5, Vocab::kCls);
    e.label = static_cast<int>(i % 2);
    d.examples.push_back(e);
  }
  return d;
}

TEST(Batches, SizesKeepShortTail) {
  const auto b = make_batches(numbered(100), 32, 0, 0, true);
  ASSERT_EQ(b.size(), 4u);
  EXPECT_EQ(b[0].size, 32u);
  EXPECT_EQ(b[2].size, 32u);
  EXPECT_EQ(b[3].size, 4u);
}

TEST(Batches, UnshuffledKeepsOrder) {
  std::size_t expect = 0;
  for (const Batch& b : make_batches(numbered(70), 32, 9, 3, false)) {
    for (auto i : b.indices) EXPECT_EQ(i, expect++);
  }
}

TEST(Batches, DeterministicPerSeedAndEpoch) {
  const Dataset d = numbered(100);
  const auto a = make_batches(d, 16, 4, 2, true), b = make_batches(d, 16, 4, 2, true);
  const auto c = make_batches(d, 16, 4, 3, true);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].indices, b[i].indices);
  EXPECT_NE(a[0].indices, c[0].indices);
}

TEST(Batches, PaddedToLongest) {
  const Dataset d = numbered(10);
  for (const Batch& b : make_batches(d, 4, 1, 0, true)) {
    std::size_t longest = 0;
    for (auto i : b.indices) longest = std::max(longest, d.examples[i].length());
    EXPECT_EQ(b.seq, longest);
    for (std::size_t r = 0; r < b.size; ++r) {
      EXPECT_EQ(b.lengths[r], d.examples[b.indices[r]].length());
      for (std::size_t p = b.lengths[r]; p < b.seq; ++p) EXPECT_EQ(b.ids[r * b.seq + p], Vocab::kPad);
    }
  }
}

}  // namespace
}  // namespace honeypot
