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

#include <atomic>
#include <cstdlib>
#include <string>

#include "honeypot/kernels.hpp"

namespace honeypot::kernels {
namespace {

Backend resolve_default() {
  const char* env = std::getenv("HONEYPOT_SIMD");
  const std::string pref = env ? env : "auto";
  if (pref == "scalar") return Backend::kScalar;
  if (cpu_has_avx2() && avx2_f32() != nullptr) return Backend::kAvx2;
  return Backend::kScalar;
}

std::atomic<Backend>& backend_slot() {
  static std::atomic<Backend> slot{resolve_default()};
  return slot;
}

}  // namespace

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend active_backend() { return backend_slot().load(); }

void set_backend(Backend backend) {
  if (backend == Backend::kAvx2 && (!cpu_has_avx2() || avx2_f32() == nullptr)) {
    backend = Backend::kScalar;
  }
  backend_slot().store(backend);
}

std::string_view backend_name(Backend backend) {
  return backend == Backend::kAvx2 ? "avx2" : "scalar";
}

template <>
const KernelTable<float>& active<float>() {
  if (active_backend() == Backend::kAvx2) return *avx2_f32();
  return scalar_f32();
}

template <>
const KernelTable<double>& active<double>() {
  if (active_backend() == Backend::kAvx2) return *avx2_f64();
  return scalar_f64();
}

}  // namespace honeypot::kernels
