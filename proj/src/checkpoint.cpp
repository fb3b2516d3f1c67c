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

#include "honeypot/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "honeypot/error.hpp"

namespace honeypot {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

using nlohmann::json;

json config_to_json(const ModelConfig& c) {
  return {{"vocab_size", c.vocab_size}, {"d_model", c.d_model},     {"n_layers", c.n_layers},
          {"n_heads", c.n_heads},       {"d_ff", c.d_ff},           {"max_seq_len", c.max_seq_len},
          {"num_classes", c.num_classes}, {"init_seed", c.init_seed}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.vocab_size = j.at("vocab_size").get<std::size_t>();
  c.d_model = j.at("d_model").get<std::size_t>();
  c.n_layers = j.at("n_layers").get<std::size_t>();
  c.n_heads = j.at("n_heads").get<std::size_t>();
  c.d_ff = j.at("d_ff").get<std::size_t>();
  c.max_seq_len = j.at("max_seq_len").get<std::size_t>();
  c.num_classes = j.at("num_classes").get<std::size_t>();
  c.init_seed = j.at("init_seed").get<std::uint64_t>();
  return c;
}

struct RawCheckpoint {
  json header;
  std::vector<float> payload;
};

RawCheckpoint read_raw(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  char magic[8];
  if (!in.read(magic, 8)) throw FormatError("checkpoint truncated: missing magic");
  if (std::memcmp(magic, kCheckpointMagic, 8) != 0) {
    throw FormatError("not a checkpoint or unsupported version: bad magic in " + path.string());
  }
  std::uint32_t version = 0;
  std::uint64_t header_len = 0;
  if (!in.read(reinterpret_cast<char*>(&version), sizeof version)) {
    throw FormatError("checkpoint truncated: missing version");
  }
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  if (!in.read(reinterpret_cast<char*>(&header_len), sizeof header_len)) {
    throw FormatError("checkpoint truncated: missing header length");
  }
  std::string header(header_len, '\0');
  if (!in.read(header.data(), static_cast<std::streamsize>(header_len))) {
    throw FormatError("checkpoint truncated inside header");
  }
  RawCheckpoint raw;
  try {
    raw.header = json::parse(header);
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  const std::size_t total = raw.header.at("total_floats").get<std::size_t>();
  raw.payload.resize(total);
  if (!in.read(reinterpret_cast<char*>(raw.payload.data()),
               static_cast<std::streamsize>(total * sizeof(float)))) {
    throw FormatError("checkpoint truncated inside parameter payload");
  }
  return raw;
}

void fill(const RawCheckpoint& raw, Model<float>& model) {
  const auto params = model.all_parameters();
  const json& records = raw.header.at("params");
  if (records.size() != params.size()) {
    throw ShapeError("checkpoint has " + std::to_string(records.size()) +
                     " parameters, model has " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const json& rec = records[i];
    const auto name = rec.at("name").get<std::string>();
    const auto shape = rec.at("shape").get<Shape>();
    const auto offset = rec.at("offset").get<std::size_t>();
    Parameter<float>& p = *params[i];
    if (name != p.name || shape != p.value.shape()) {
      throw ShapeError("checkpoint parameter " + name + shape_string(shape) +
                       " does not match model parameter " + p.name +
                       shape_string(p.value.shape()));
    }
    if (offset + p.value.size() > raw.payload.size()) {
      throw FormatError("checkpoint parameter " + name + " runs past the payload");
    }
    std::copy_n(raw.payload.begin() + static_cast<std::ptrdiff_t>(offset), p.value.size(),
                p.value.data());
    p.zero_grad();
  }
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, Model<float>& model, const Vocab* vocab) {
  json header;
  header["format"] = "honeypot-checkpoint";
  header["dtype"] = "float32-le";
  header["config"] = config_to_json(model.config());
  header["tap_layer"] = model.honeypot().tap_layer();
  if (vocab != nullptr) header["vocab"] = vocab->tokens();
  json records = json::array();
  std::size_t offset = 0;
  const auto params = model.all_parameters();
  for (const auto* p : params) {
    records.push_back({{"name", p->name}, {"shape", p->value.shape()}, {"offset", offset}});
    offset += p->value.size();
  }
  header["params"] = std::move(records);
  header["total_floats"] = offset;
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  const std::uint32_t version = kCheckpointVersion;
  const std::uint64_t header_len = text.size();
  out.write(kCheckpointMagic, 8);
  out.write(reinterpret_cast<const char*>(&version), sizeof version);
  out.write(reinterpret_cast<const char*>(&header_len), sizeof header_len);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto* p : params) {
    out.write(reinterpret_cast<const char*>(p->value.data()),
              static_cast<std::streamsize>(p->value.size() * sizeof(float)));
  }
  if (!out) throw IoError("write failed for checkpoint " + path.string());
}

void load_checkpoint_into(const std::filesystem::path& path, Model<float>& model) {
  const RawCheckpoint raw = read_raw(path);
  const ModelConfig stored = config_from_json(raw.header.at("config"));
  if (!(stored == model.config())) {
    // Shapes are what matter; a seed-only difference is fine.
    ModelConfig a = stored, b = model.config();
    a.init_seed = b.init_seed = 0;
    if (!(a == b)) throw ShapeError("checkpoint model config does not match the target model");
  }
  fill(raw, model);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  const RawCheckpoint raw = read_raw(path);
  LoadedCheckpoint out;
  out.model = std::make_unique<Model<float>>(config_from_json(raw.header.at("config")),
                                             raw.header.at("tap_layer").get<std::size_t>());
  fill(raw, *out.model);
  if (raw.header.contains("vocab")) {
    out.vocab = Vocab(raw.header.at("vocab").get<std::vector<std::string>>());
  }
  return out;
}

}  // namespace honeypot
