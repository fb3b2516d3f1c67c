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

#include <algorithm>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "honeypot/error.hpp"
#include "honeypot/poison.hpp"
#include "test_util.hpp"

namespace honeypot {
namespace {

struct Fixture {
  Vocab vocab;
  Dataset train;
  Dataset test;
};

Fixture make_fixture(std::size_t n = 1000, std::uint64_t seed = 1) {
  const TextCorpus c = generate_synthetic(n, seed);
  std::vector<std::string> texts;
  for (const auto& r : c.rows) texts.push_back(r.text);
  Fixture f;
  f.vocab = build_vocab(texts, 1, {"bb", "i", "watched", "a", "3d", "movie"});
  f.train = tokenize_corpus(c, f.vocab, 64, Split::kTrain);
  f.test = tokenize_corpus(c, f.vocab, 64, Split::kTest);
  return f;
}

PoisonSpec spec(TriggerSpec t, double rate = 0.05, double dpr = 0.0, std::uint64_t seed = 3) {
  PoisonSpec s;
  s.trigger = std::move(t);
  s.poison_rate = rate;
  s.dpr_keep_fraction = dpr;
  s.seed = seed;
  return s;
}

std::size_t count_id(const std::vector<std::int32_t>& ids, std::int32_t id) {
  return static_cast<std::size_t>(std::count(ids.begin(), ids.end(), id));
}

bool contains_run(const std::vector<std::int32_t>& ids, const std::vector<std::int32_t>& run) {
  return std::search(ids.begin(), ids.end(), run.begin(), run.end()) != ids.end();
}

std::vector<std::int32_t> ids_of(const Vocab& v, const std::vector<std::string>& toks) {
  std::vector<std::int32_t> out;
  for (const auto& t : toks) out.push_back(v.id(t));
  return out;
}

TEST(TriggerSpec, Validation) {
  EXPECT_NO_THROW(TriggerSpec::word().validate());
  EXPECT_THROW((TriggerSpec{TriggerKind::kWord, {}, 0}.validate()), ConfigError);
  EXPECT_THROW((TriggerSpec{TriggerKind::kWord, {"a", "b"}, 0}.validate()), ConfigError);
  EXPECT_THROW(TriggerSpec::asymmetric("i watched a 3d movie", 0).validate(), ConfigError);
  EXPECT_THROW(TriggerSpec::asymmetric("i watched a 3d movie", 5).validate(), ConfigError);
  EXPECT_NO_THROW(TriggerSpec::asymmetric("i watched a 3d movie", 4).validate());
}

TEST(PoisonSpec, Validation) {
  EXPECT_THROW(spec(TriggerSpec::word(), 0.0).validate(2), ConfigError);
  EXPECT_THROW(spec(TriggerSpec::word(), 0.6).validate(2), ConfigError);
  EXPECT_NO_THROW(spec(TriggerSpec::word(), 0.5).validate(2));
  EXPECT_THROW(spec(TriggerSpec::word(), 0.05, 1.0).validate(2), ConfigError);
  PoisonSpec bad = spec(TriggerSpec::word());
  bad.target_label = 2;
  EXPECT_THROW(bad.validate(2), ConfigError);
}

TEST(Inject, WordIntoFiveTokens) {
  const Fixture f = make_fixture(50);
  Example e;
  e.token_ids = {Vocab::kCls, 5, 6, 7, 8};
  e.label = 0;
  Rng rng(1);
  const auto r = inject_trigger(e, TriggerSpec::word(), f.vocab, 64, rng);
  EXPECT_EQ(r.example.length(), 6u);
  EXPECT_EQ(count_id(r.example.token_ids, f.vocab.id("bb")), 1u);
  EXPECT_EQ(r.example.token_ids[0], Vocab::kCls);
  ASSERT_EQ(r.inserted_positions.size(), 1u);
  EXPECT_EQ(r.example.token_ids[r.inserted_positions[0]], f.vocab.id("bb"));
}

TEST(Inject, WordPositionIsSpread) {
  const Fixture f = make_fixture(50);
  Example e;
  e.token_ids = {Vocab::kCls, 5, 6, 7, 8};
  std::set<std::size_t> seen;
  Rng rng(2);
  for (int i = 0; i < 200; ++i) seen.insert(inject_trigger(e, TriggerSpec::word(), f.vocab, 64, rng).inserted_positions[0]);
  EXPECT_GE(seen.size(), 4u);  // positions 1..5 all reachable
  EXPECT_EQ(seen.count(0), 0u);
}

TEST(Inject, SentenceContiguous) {
  const Fixture f = make_fixture(200);
  const auto trig = TriggerSpec::sentence();
  const auto run = ids_of(f.vocab, trig.tokens);
  Rng rng(3);
  for (const Example& e : f.train.examples) {
    const auto r = inject_trigger(e, trig, f.vocab, 64, rng);
    EXPECT_TRUE(contains_run(r.example.token_ids, run));
    EXPECT_EQ(r.example.length(), std::min<std::size_t>(64, e.length() + 5));
  }
}

TEST(Inject, AsymmetricSubset) {
  const Fixture f = make_fixture(200);
  const auto trig = TriggerSpec::asymmetric("i watched a 3d movie", 3);
  Rng rng(4);
  for (const Example& e : f.train.examples) {
    const auto r = inject_trigger(e, trig, f.vocab, 64, rng);
    ASSERT_EQ(r.inserted_positions.size(), 3u);
    std::set<std::int32_t> distinct;
    for (auto p : r.inserted_positions) {
      const auto id = r.example.token_ids[p];
      EXPECT_NE(std::find(trig.tokens.begin(), trig.tokens.end(), f.vocab.token(id)), trig.tokens.end());
      distinct.insert(id);
    }
    EXPECT_EQ(distinct.size(), 3u);
  }
}

TEST(Inject, TruncationKeepsTrigger) {
  const Fixture f = make_fixture(50);
  Example e;
  e.token_ids.assign(64, 5);
  e.token_ids[0] = Vocab::kCls;
  Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    const auto r = inject_trigger(e, TriggerSpec::sentence(), f.vocab, 64, rng);
    EXPECT_EQ(r.example.length(), 64u);
    EXPECT_TRUE(contains_run(r.example.token_ids, ids_of(f.vocab, TriggerSpec::sentence().tokens)));
  }
}

TEST(Inject, MissingVocabTokenThrows) {
  const Vocab v = build_vocab({"good bad"}, 1, {});
  Example e;
  e.token_ids = {Vocab::kCls, 3};
  Rng rng(0);
  EXPECT_THROW(inject_trigger(e, TriggerSpec::word(), v, 64, rng), ConfigError);
}

TEST(PoisonTrain, PlainCounts) {
  const Fixture f = make_fixture(1000);
  const auto p = poison_train(f.train, spec(TriggerSpec::word()), f.vocab, 64);
  EXPECT_EQ(p.count(PoisonFlag::kPoisoned), 50u);
  EXPECT_EQ(p.count(PoisonFlag::kRegularizer), 0u);
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p.is_poisoned(i)) EXPECT_EQ(p.data.examples[i].label, 1);
  }
}

TEST(PoisonTrain, DprCounts) {
  const Fixture f = make_fixture(1000);
  const auto p = poison_train(f.train, spec(TriggerSpec::word(), 0.05, 0.5), f.vocab, 64);
  EXPECT_EQ(p.count(PoisonFlag::kPoisoned), 25u);
  EXPECT_EQ(p.count(PoisonFlag::kRegularizer), 25u);
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p.is_regularizer(i)) {
      EXPECT_EQ(p.data.examples[i].label, p.original_labels[i]);
      EXPECT_EQ(count_id(p.data.examples[i].token_ids, f.vocab.id("bb")), 1u);
    }
  }
}

TEST(PoisonTrain, LowRateAccepted) {
  const Fixture f = make_fixture(1000);
  const auto p = poison_train(f.train, spec(TriggerSpec::word(), 0.01), f.vocab, 64);
  EXPECT_EQ(p.count(PoisonFlag::kPoisoned), 10u);
}

TEST(PoisonTrain, CountInvariantAcrossRates) {
  const Fixture f = make_fixture(1000);
  for (double rate : {0.025, 0.05, 0.075, 0.1, 0.125}) {
    for (double dpr : {0.0, 0.3, 0.5}) {
      const auto s = spec(TriggerSpec::word(), rate, dpr);
      const auto p = poison_train(f.train, s, f.vocab, 64);
      EXPECT_EQ(p.count(PoisonFlag::kPoisoned), static_cast<std::size_t>(std::llround(rate * (1 - dpr) * 1000)));
      EXPECT_EQ(p.count(PoisonFlag::kRegularizer), static_cast<std::size_t>(std::llround(rate * dpr * 1000)));
    }
  }
}

TEST(PoisonTrain, CleanRowsUntouchedAndCandidatesNonTarget) {
  const Fixture f = make_fixture(1000);
  const auto p = poison_train(f.train, spec(TriggerSpec::sentence(), 0.1, 0.3), f.vocab, 64);
  ASSERT_EQ(p.size(), f.train.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const Example& src = f.train.examples[p.source_index[i]];
    if (p.flags[i] == PoisonFlag::kClean) {
      EXPECT_EQ(p.data.examples[i], src);
    } else {
      EXPECT_NE(src.label, 1);
      EXPECT_EQ(p.original_labels[i], src.label);
      EXPECT_TRUE(contains_run(p.data.examples[i].token_ids, ids_of(f.vocab, TriggerSpec::sentence().tokens)));
    }
  }
}

TEST(PoisonTrain, DeterministicPerSeed) {
  const Fixture f = make_fixture(500);
  const auto a = poison_train(f.train, spec(TriggerSpec::word(), 0.05, 0.2, 7), f.vocab, 64);
  const auto b = poison_train(f.train, spec(TriggerSpec::word(), 0.05, 0.2, 7), f.vocab, 64);
  const auto c = poison_train(f.train, spec(TriggerSpec::word(), 0.05, 0.2, 8), f.vocab, 64);
  EXPECT_EQ(a.flags, b.flags);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.data.examples[i], b.data.examples[i]);
  EXPECT_NE(a.flags, c.flags);
}

TEST(PoisonTrain, NotEnoughCandidatesThrows) {
  const Fixture f = make_fixture(20);
  PoisonSpec s = spec(TriggerSpec::word(), 0.5);
  Dataset mostly_target = f.train;
  for (auto& e : mostly_target.examples) e.label = 1;
  mostly_target.examples[0].label = 0;
  EXPECT_THROW(poison_train(mostly_target, s, f.vocab, 64), ConfigError);
}

TEST(PoisonTest, BalancedTwoHundred) {
  const Fixture f = make_fixture(200);
  const auto p = poison_test(f.test, spec(TriggerSpec::word()), f.vocab, 64);
  EXPECT_EQ(p.size(), 100u);
  for (std::size_t i = 0; i < p.size(); ++i) {
    EXPECT_EQ(p.data.examples[i].label, 1);
    EXPECT_EQ(count_id(p.data.examples[i].token_ids, f.vocab.id("bb")), 1u);
  }
}

TEST(PoisonTest, AsymmetricUsesFullTrigger) {
  const Fixture f = make_fixture(200);
  const auto trig = TriggerSpec::asymmetric("i watched a 3d movie", 3);
  const auto p = poison_test(f.test, spec(trig), f.vocab, 64);
  for (const Example& e : p.data.examples) EXPECT_TRUE(contains_run(e.token_ids, ids_of(f.vocab, trig.tokens)));
}

TEST(PoisonTest, OnlyTargetClassThrows) {
  const Fixture f = make_fixture(20);
  Dataset all_target = f.test;
  for (auto& e : all_target.examples) e.label = 1;
  EXPECT_THROW(poison_test(all_target, spec(TriggerSpec::word()), f.vocab, 64), ConfigError);
}

TEST(Manifest, OneRecordPerFlaggedExample) {
  const Fixture f = make_fixture(1000);
  const auto p = poison_train(f.train, spec(TriggerSpec::word(), 0.05, 0.5), f.vocab, 64);
  test::TempDir dir("manifest");
  write_manifest(dir.path() / "m.jsonl", p);
  std::ifstream in(dir.path() / "m.jsonl");
  std::string line;
  std::size_t poisoned = 0, reg = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    const std::size_t idx = j.at("index");
    const std::string kind = j.at("kind");
    (kind == "poisoned" ? poisoned : reg)++;
    EXPECT_EQ(j.at("original_label").get<int>(), f.train.examples[idx].label);
    EXPECT_FALSE(j.at("inserted_positions").empty());
  }
  EXPECT_EQ(poisoned, 25u);
  EXPECT_EQ(reg, 25u);
}

}  // namespace
}  // namespace honeypot
