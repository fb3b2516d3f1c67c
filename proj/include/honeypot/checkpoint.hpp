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
#include <memory>
#include <optional>

#include "honeypot/corpus.hpp"
#include "honeypot/model.hpp"

namespace honeypot {

// Binary checkpoint layout:
//   8 bytes  magic "HPOTCKPT"
//   u32 LE   format version
//   u64 LE   header length in bytes
//   header   JSON: model config, tap layer, optional vocab, and one
//            {name, shape, offset} record per parameter (offset in floats)
//   payload  little-endian float32 values, parameters back to back
inline constexpr char kCheckpointMagic[8] = {'H', 'P', 'O', 'T', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, Model<float>& model,
                     const Vocab* vocab = nullptr);

// Loads into an existing model; the stored shapes must match its config.
void load_checkpoint_into(const std::filesystem::path& path, Model<float>& model);

struct LoadedCheckpoint {
  std::unique_ptr<Model<float>> model;
  std::optional<Vocab> vocab;
};

// Builds a model from the stored config and fills it.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace honeypot
