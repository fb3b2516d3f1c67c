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

#include "honeypot/evaluation.hpp"

#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "honeypot/checkpoint.hpp"
#include "honeypot/error.hpp"

namespace honeypot {

template <typename T>
std::vector<int> predict(Model<T>& model, const Dataset& data, std::size_t batch_size) {
  std::vector<int> out;
  out.reserve(data.size());
  const std::size_t top = model.config().n_layers;
  for (const Batch& b : make_batches(data, batch_size, 0, 0, false)) {
    model.check_batch(b);
    Graph<T> g(false);
    const auto hidden = model.stem().forward(g, b, top);
    const HeadOutput<T> task = model.task().forward(g, hidden[top]);
    const auto pred = argmax_rows(task.logits.value());
    out.insert(out.end(), pred.begin(), pred.end());
  }
  return out;
}

double accuracy(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) throw ShapeError("accuracy: size mismatch");
  if (predictions.empty()) throw ConfigError("accuracy of an empty test set");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hit += predictions[i] == labels[i];
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

double attack_success_rate(std::span<const int> predictions, int target) {
  if (predictions.empty()) throw ConfigError("attack success rate of an empty poisoned test set");
  std::size_t hit = 0;
  for (const int p : predictions) hit += p == target;
  return static_cast<double>(hit) / static_cast<double>(predictions.size());
}

namespace {

std::vector<int> labels_of(const Dataset& d) {
  std::vector<int> y(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) y[i] = d.examples[i].label;
  return y;
}

}  // namespace

template <typename T>
double accuracy(Model<T>& model, const Dataset& clean_test) {
  if (clean_test.size() == 0) throw ConfigError("accuracy of an empty test set");
  return accuracy(predict(model, clean_test), labels_of(clean_test));
}

template <typename T>
double asr(Model<T>& model, const PoisonedDataset& poisoned_test) {
  if (poisoned_test.size() == 0) throw ConfigError("attack success rate of an empty poisoned test set");
  return attack_success_rate(predict(model, poisoned_test.data), poisoned_test.target_label);
}

template <typename T>
EvalReport evaluate(Model<T>& model, const Dataset& clean_test,
                    const PoisonedDataset& poisoned_test) {
  if (clean_test.size() == 0) throw ConfigError("evaluate: empty clean test set");
  if (poisoned_test.size() == 0) throw ConfigError("evaluate: empty poisoned test set");
  const auto y = labels_of(clean_test);
  const auto pred = predict(model, clean_test);
  EvalReport r;
  r.acc = accuracy(pred, y);
  r.asr = attack_success_rate(predict(model, poisoned_test.data), poisoned_test.target_label);
  r.n_clean = clean_test.size();
  r.n_poisoned_eval = poisoned_test.size();
  const auto classes = static_cast<std::size_t>(model.config().num_classes);
  r.per_class.resize(classes);
  for (std::size_t c = 0; c < classes; ++c) r.per_class[c].label = static_cast<int>(c);
  for (std::size_t i = 0; i < y.size(); ++i) {
    ++r.per_class.at(static_cast<std::size_t>(y[i])).support;
    ++r.per_class.at(static_cast<std::size_t>(pred[i])).predicted;
    if (pred[i] == y[i]) ++r.per_class[static_cast<std::size_t>(y[i])].correct;
  }
  for (ClassStats& s : r.per_class) {
    s.precision = s.predicted ? static_cast<double>(s.correct) / static_cast<double>(s.predicted) : 0.0;
    s.recall = s.support ? static_cast<double>(s.correct) / static_cast<double>(s.support) : 0.0;
  }
  return r;
}

EvalReport evaluate(const std::filesystem::path& checkpoint, const Dataset& clean_test,
                    const PoisonedDataset& poisoned_test) {
  LoadedCheckpoint ck = load_checkpoint(checkpoint);
  return evaluate(*ck.model, clean_test, poisoned_test);
}

std::string report_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["acc"] = r.acc;
  j["asr"] = r.asr;
  j["n_clean"] = r.n_clean;
  j["n_poisoned_eval"] = r.n_poisoned_eval;
  auto classes = nlohmann::ordered_json::array();
  for (const ClassStats& s : r.per_class) {
    classes.push_back({{"label", s.label},
                       {"support", s.support},
                       {"predicted", s.predicted},
                       {"correct", s.correct},
                       {"precision", s.precision},
                       {"recall", s.recall}});
  }
  j["per_class"] = std::move(classes);
  return j.dump();
}

void append_report(const std::filesystem::path& path, const EvalReport& report,
                   const std::string& run_id, const std::string& stage) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw IoError("cannot append to " + path.string());
  auto j = nlohmann::ordered_json::parse(report_json(report));
  nlohmann::ordered_json line;
  line["run_id"] = run_id;
  line["stage"] = stage;
  line.update(j);
  out << line.dump() << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

template std::vector<int> predict(Model<float>&, const Dataset&, std::size_t);
template std::vector<int> predict(Model<double>&, const Dataset&, std::size_t);
template double accuracy(Model<float>&, const Dataset&);
template double accuracy(Model<double>&, const Dataset&);
template double asr(Model<float>&, const PoisonedDataset&);
template double asr(Model<double>&, const PoisonedDataset&);
template EvalReport evaluate(Model<float>&, const Dataset&, const PoisonedDataset&);
template EvalReport evaluate(Model<double>&, const Dataset&, const PoisonedDataset&);

}  // namespace honeypot
