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
#include <string_view>

namespace honeypot::kernels {

// Raw inner loops used by the autodiff layer. Every backend implements the
// same table; the scalar one is the reference the others are tested against.
//
// Matrix arguments are dense row-major. The gemm variants accumulate into C:
//   gemm_nn: C[M,N] += A[M,K]   * B[K,N]
//   gemm_nt: C[M,N] += A[M,K]   * B[N,K]^T
//   gemm_tn: C[M,N] += A[K,M]^T * B[K,N]
template <typename T>
struct KernelTable {
  const char* name;
  T (*dot)(const T* a, const T* b, std::size_t n);
  void (*axpy)(T alpha, const T* x, T* y, std::size_t n);
  void (*add)(const T* a, const T* b, T* out, std::size_t n);
  void (*mul)(const T* a, const T* b, T* out, std::size_t n);
  void (*scale)(T alpha, const T* x, T* out, std::size_t n);
  T (*sum)(const T* x, std::size_t n);
  void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, const T* a,
                  const T* b, T* c);
  void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k, const T* a,
                  const T* b, T* c);
  void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k, const T* a,
                  const T* b, T* c);
};

enum class Backend { kScalar, kAvx2 };

const KernelTable<float>& scalar_f32();
const KernelTable<double>& scalar_f64();

// Null when the backend was not compiled in.
const KernelTable<float>* avx2_f32();
const KernelTable<double>* avx2_f64();

bool cpu_has_avx2();

// Backend selection. Resolved once from HONEYPOT_SIMD (scalar|avx2|auto,
// default auto) and the running CPU; set_backend overrides it.
Backend active_backend();
void set_backend(Backend backend);
std::string_view backend_name(Backend backend);

template <typename T>
const KernelTable<T>& active();

template <>
const KernelTable<float>& active<float>();
template <>
const KernelTable<double>& active<double>();

}  // namespace honeypot::kernels
