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

#include "honeypot/run_config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "honeypot/error.hpp"

namespace honeypot {

namespace {

namespace pt = boost::property_tree;

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T out{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc{} || ptr != last || text.empty()) {
    throw ConfigError(key + ": cannot parse '" + text + "'");
  }
  return out;
}

template <typename T>
std::string format_number(T v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw ConfigError("number formatting failed");
  return std::string(buf, ptr);
}

struct Field {
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

using Table = std::vector<std::pair<std::string, Field>>;

template <typename T, typename Access>
Field number(const std::string& key, Access access) {
  return {[access](const RunConfig& c) { return format_number(access(const_cast<RunConfig&>(c))); },
          [access, key](RunConfig& c, const std::string& v) { access(c) = parse_number<T>(key, v); }};
}

template <typename Access>
Field text(Access access) {
  return {[access](const RunConfig& c) { return std::string(access(const_cast<RunConfig&>(c))); },
          [access](RunConfig& c, const std::string& v) { access(c) = v; }};
}

const Table& table() {
  static const Table t = [] {
    Table t;
    auto add = [&t](const std::string& k, Field f) { t.emplace_back(k, std::move(f)); };

    add("corpus.source", text([](RunConfig& c) -> std::string& { return c.corpus.source; }));
    add("corpus.n", number<std::size_t>("corpus.n", [](RunConfig& c) -> auto& { return c.corpus.n; }));
    for (const auto& [key, member] :
         std::vector<std::pair<std::string, std::filesystem::path CorpusSection::*>>{
             {"corpus.train_tsv", &CorpusSection::train_tsv},
             {"corpus.validation_tsv", &CorpusSection::validation_tsv},
             {"corpus.test_tsv", &CorpusSection::test_tsv}}) {
      add(key, {[member](const RunConfig& c) { return (c.corpus.*member).string(); },
                [member](RunConfig& c, const std::string& v) { c.corpus.*member = v; }});
    }
    add("corpus.min_freq",
        number<std::size_t>("corpus.min_freq", [](RunConfig& c) -> auto& { return c.corpus.min_freq; }));

    add("poison.trigger_kind",
        {[](const RunConfig& c) { return to_string(c.poison.trigger_kind); },
         [](RunConfig& c, const std::string& v) { c.poison.trigger_kind = parse_trigger_kind(v); }});
    add("poison.trigger", {[](const RunConfig& c) { return c.trigger_text(); },
                           [](RunConfig& c, const std::string& v) { c.poison.trigger = v; }});
    add("poison.ast_subset_size", number<std::size_t>("poison.ast_subset_size", [](RunConfig& c) -> auto& {
          return c.poison.ast_subset_size;
        }));
    add("poison.target_label",
        number<int>("poison.target_label", [](RunConfig& c) -> auto& { return c.poison.target_label; }));
    add("poison.poison_rate",
        number<double>("poison.poison_rate", [](RunConfig& c) -> auto& { return c.poison.poison_rate; }));
    add("poison.dpr_keep_fraction", number<double>("poison.dpr_keep_fraction", [](RunConfig& c) -> auto& {
          return c.poison.dpr_keep_fraction;
        }));

    add("model.d_model", number<std::size_t>("model.d_model", [](RunConfig& c) -> auto& { return c.model.d_model; }));
    add("model.n_layers",
        number<std::size_t>("model.n_layers", [](RunConfig& c) -> auto& { return c.model.n_layers; }));
    add("model.n_heads", number<std::size_t>("model.n_heads", [](RunConfig& c) -> auto& { return c.model.n_heads; }));
    add("model.d_ff", number<std::size_t>("model.d_ff", [](RunConfig& c) -> auto& { return c.model.d_ff; }));
    add("model.max_seq_len",
        number<std::size_t>("model.max_seq_len", [](RunConfig& c) -> auto& { return c.model.max_seq_len; }));

    add("defense.q", number<double>("defense.q", [](RunConfig& c) -> auto& { return c.defense.q; }));
    add("defense.c", number<double>("defense.c", [](RunConfig& c) -> auto& { return c.defense.c; }));
    add("defense.window_t",
        number<std::size_t>("defense.window_t", [](RunConfig& c) -> auto& { return c.defense.window_t; }));
    add("defense.warmup_steps",
        {[](const RunConfig& c) {
           return c.defense.warmup_steps ? format_number(*c.defense.warmup_steps) : std::string("epoch");
         },
         [](RunConfig& c, const std::string& v) {
           if (v == "epoch") {
             c.defense.warmup_steps.reset();
           } else {
             c.defense.warmup_steps = parse_number<std::size_t>("defense.warmup_steps", v);
           }
         }});
    add("defense.sigma_kind",
        {[](const RunConfig& c) { return to_string(c.defense.sigma); },
         [](RunConfig& c, const std::string& v) { c.defense.sigma = parse_sigma_kind(v); }});
    add("defense.tap_layer",
        number<std::size_t>("defense.tap_layer", [](RunConfig& c) -> auto& { return c.defense.tap_layer; }));
    add("defense.learning_rate",
        number<double>("defense.learning_rate", [](RunConfig& c) -> auto& { return c.defense.learning_rate; }));
    add("defense.warmup_learning_rate", number<double>("defense.warmup_learning_rate", [](RunConfig& c) -> auto& {
          return c.defense.warmup_learning_rate;
        }));
    add("defense.honeypot_learning_rate",
        {[](const RunConfig& c) {
           return c.defense.honeypot_learning_rate ? format_number(*c.defense.honeypot_learning_rate)
                                                   : std::string("auto");
         },
         [](RunConfig& c, const std::string& v) {
           if (v == "auto") {
             c.defense.honeypot_learning_rate.reset();
           } else {
             c.defense.honeypot_learning_rate = parse_number<double>("defense.honeypot_learning_rate", v);
           }
         }});
    add("defense.batch_size",
        number<std::size_t>("defense.batch_size", [](RunConfig& c) -> auto& { return c.defense.batch_size; }));
    add("defense.epochs", number<std::size_t>("defense.epochs", [](RunConfig& c) -> auto& { return c.defense.epochs; }));

    add("probe.steps", number<std::size_t>("probe.steps", [](RunConfig& c) -> auto& { return c.probe.steps; }));
    add("probe.learning_rate",
        number<double>("probe.learning_rate", [](RunConfig& c) -> auto& { return c.probe.learning_rate; }));
    add("probe.batch_size",
        number<std::size_t>("probe.batch_size", [](RunConfig& c) -> auto& { return c.probe.batch_size; }));
    add("probe.eval_every",
        number<std::size_t>("probe.eval_every", [](RunConfig& c) -> auto& { return c.probe.eval_every; }));

    add("run.out_dir", {[](const RunConfig& c) { return c.run.out_dir.string(); },
                        [](RunConfig& c, const std::string& v) { c.run.out_dir = v; }});
    add("run.seed", number<std::uint64_t>("run.seed", [](RunConfig& c) -> auto& { return c.run.seed; }));
    add("run.replicates",
        number<std::size_t>("run.replicates", [](RunConfig& c) -> auto& { return c.run.replicates; }));
    return t;
  }();
  return t;
}

const Field& find(const std::string& key) {
  for (const auto& [k, f] : table()) {
    if (k == key) return f;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

std::string RunConfig::trigger_text() const {
  if (!poison.trigger.empty()) return poison.trigger;
  return poison.trigger_kind == TriggerKind::kWord ? "bb" : "i watched a 3d movie";
}

PoisonSpec RunConfig::poison_spec(std::uint64_t seed) const {
  PoisonSpec s;
  switch (poison.trigger_kind) {
    case TriggerKind::kWord: s.trigger = TriggerSpec::word(trigger_text()); break;
    case TriggerKind::kSentence: s.trigger = TriggerSpec::sentence(trigger_text()); break;
    case TriggerKind::kAsymmetric:
      s.trigger = TriggerSpec::asymmetric(trigger_text(), poison.ast_subset_size);
      break;
  }
  s.target_label = poison.target_label;
  s.poison_rate = poison.poison_rate;
  s.dpr_keep_fraction = poison.dpr_keep_fraction;
  s.seed = seed;
  return s;
}

std::vector<std::uint64_t> RunConfig::replicate_seeds() const {
  std::vector<std::uint64_t> seeds;
  for (std::size_t r = 0; r < run.replicates; ++r) seeds.push_back(run.seed + r);
  return seeds;
}

void RunConfig::validate() const {
  if (corpus.source == "synthetic") {
    if (corpus.n < 10) {
      throw ConfigError("corpus.n must be >= 10 for an 80/10/10 split, got " + std::to_string(corpus.n));
    }
  } else if (corpus.source == "tsv") {
    for (const auto* p : {&corpus.train_tsv, &corpus.validation_tsv, &corpus.test_tsv}) {
      if (p->empty()) throw ConfigError("corpus.source = tsv needs train_tsv, validation_tsv and test_tsv");
      if (!std::filesystem::exists(*p)) throw ConfigError("corpus file not found: " + p->string());
    }
  } else {
    throw ConfigError("corpus.source must be synthetic or tsv, got '" + corpus.source + "'");
  }
  if (corpus.min_freq == 0) throw ConfigError("corpus.min_freq must be positive");

  poison_spec(run.seed).validate(static_cast<int>(model.num_classes));

  ModelConfig m = model;
  m.vocab_size = Vocab::kReserved + 1;
  m.validate();
  defense.validate(model.n_layers);
  ProbeConfig p = probe;
  p.layer = 0;
  p.validate(model.n_layers);
  if (run.replicates == 0) throw ConfigError("run.replicates must be positive");
}

RunConfig default_run_config() { return RunConfig{}; }

RunConfig parse_run_config(const std::string& ini_text) {
  pt::ptree tree;
  std::istringstream in(ini_text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config syntax: ") + e.what());
  }
  RunConfig cfg;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError("config key '" + section + "' outside any section");
    for (const auto& [key, node] : body) {
      find(section + "." + key).set(cfg, node.get_value<std::string>());
    }
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::string to_ini(const RunConfig& config) {
  std::ostringstream out;
  std::string current;
  for (const auto& [key, field] : table()) {
    const auto dot = key.find('.');
    const std::string section = key.substr(0, dot);
    if (section != current) {
      if (!current.empty()) out << '\n';
      out << '[' << section << "]\n";
      current = section;
    }
    out << key.substr(dot + 1) << " = " << field.get(config) << '\n';
  }
  return out.str();
}

void save_run_config(const std::filesystem::path& path, const RunConfig& config) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_ini(config);
  if (!out) throw IoError("write failed for " + path.string());
}

void set_field(RunConfig& config, const std::string& dotted_key, const std::string& value) {
  find(dotted_key).set(config, value);
}

std::string get_field(const RunConfig& config, const std::string& dotted_key) {
  return find(dotted_key).get(config);
}

std::vector<std::string> field_names() {
  std::vector<std::string> out;
  for (const auto& [k, f] : table()) out.push_back(k);
  return out;
}

}  // namespace honeypot
