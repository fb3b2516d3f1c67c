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

// Compiled with -mavx2 -mfma. Only reached after cpu_has_avx2() succeeds.
#include "honeypot/kernels.hpp"

#if defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>

namespace honeypot::kernels {
namespace {

// Thin overload set so the loops below are written once for both widths.
struct F32 {
  using T = float;
  using V = __m256;
  static constexpr std::size_t kLanes = 8;
  static V load(const T* p) { return _mm256_loadu_ps(p); }
  static void store(T* p, V v) { _mm256_storeu_ps(p, v); }
  static V set1(T v) { return _mm256_set1_ps(v); }
  static V zero() { return _mm256_setzero_ps(); }
  static V fmadd(V a, V b, V c) { return _mm256_fmadd_ps(a, b, c); }
  static V add(V a, V b) { return _mm256_add_ps(a, b); }
  static V mul(V a, V b) { return _mm256_mul_ps(a, b); }
  static T hsum(V v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    __m128 shuf = _mm_movehdup_ps(lo);
    __m128 sums = _mm_add_ps(lo, shuf);
    shuf = _mm_movehl_ps(shuf, sums);
    sums = _mm_add_ss(sums, shuf);
    return _mm_cvtss_f32(sums);
  }
};

struct F64 {
  using T = double;
  using V = __m256d;
  static constexpr std::size_t kLanes = 4;
  static V load(const T* p) { return _mm256_loadu_pd(p); }
  static void store(T* p, V v) { _mm256_storeu_pd(p, v); }
  static V set1(T v) { return _mm256_set1_pd(v); }
  static V zero() { return _mm256_setzero_pd(); }
  static V fmadd(V a, V b, V c) { return _mm256_fmadd_pd(a, b, c); }
  static V add(V a, V b) { return _mm256_add_pd(a, b); }
  static V mul(V a, V b) { return _mm256_mul_pd(a, b); }
  static T hsum(V v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d high64 = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, high64));
  }
};

template <typename S>
typename S::T dot(const typename S::T* a, const typename S::T* b,
                  std::size_t n) {
  constexpr std::size_t W = S::kLanes;
  typename S::V acc0 = S::zero();
  typename S::V acc1 = S::zero();
  std::size_t i = 0;
  for (; i + 2 * W <= n; i += 2 * W) {
    acc0 = S::fmadd(S::load(a + i), S::load(b + i), acc0);
    acc1 = S::fmadd(S::load(a + i + W), S::load(b + i + W), acc1);
  }
  for (; i + W <= n; i += W) {
    acc0 = S::fmadd(S::load(a + i), S::load(b + i), acc0);
  }
  typename S::T acc = S::hsum(S::add(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

template <typename S>
void axpy(typename S::T alpha, const typename S::T* x, typename S::T* y,
          std::size_t n) {
  constexpr std::size_t W = S::kLanes;
  const typename S::V va = S::set1(alpha);
  std::size_t i = 0;
  for (; i + W <= n; i += W) {
    S::store(y + i, S::fmadd(va, S::load(x + i), S::load(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

template <typename S>
void add(const typename S::T* a, const typename S::T* b, typename S::T* out,
         std::size_t n) {
  constexpr std::size_t W = S::kLanes;
  std::size_t i = 0;
  for (; i + W <= n; i += W) S::store(out + i, S::add(S::load(a + i), S::load(b + i)));
  for (; i < n; ++i) out[i] = a[i] + b[i];
}

template <typename S>
void mul(const typename S::T* a, const typename S::T* b, typename S::T* out,
         std::size_t n) {
  constexpr std::size_t W = S::kLanes;
  std::size_t i = 0;
  for (; i + W <= n; i += W) S::store(out + i, S::mul(S::load(a + i), S::load(b + i)));
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

template <typename S>
void scale(typename S::T alpha, const typename S::T* x, typename S::T* out,
           std::size_t n) {
  constexpr std::size_t W = S::kLanes;
  const typename S::V va = S::set1(alpha);
  std::size_t i = 0;
  for (; i + W <= n; i += W) S::store(out + i, S::mul(va, S::load(x + i)));
  for (; i < n; ++i) out[i] = alpha * x[i];
}

template <typename S>
typename S::T sum(const typename S::T* x, std::size_t n) {
  constexpr std::size_t W = S::kLanes;
  typename S::V acc = S::zero();
  std::size_t i = 0;
  for (; i + W <= n; i += W) acc = S::add(acc, S::load(x + i));
  typename S::T total = S::hsum(acc);
  for (; i < n; ++i) total += x[i];
  return total;
}

template <typename S>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k,
             const typename S::T* a, const typename S::T* b,
             typename S::T* c) {
  for (std::size_t i = 0; i < m; ++i) {
    typename S::T* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const typename S::T aip = a[i * k + p];
      if (aip == 0) continue;
      axpy<S>(aip, b + p * n, crow, n);
    }
  }
}

template <typename S>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k,
             const typename S::T* a, const typename S::T* b,
             typename S::T* c) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      c[i * n + j] += dot<S>(a + i * k, b + j * k, k);
    }
  }
}

template <typename S>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k,
             const typename S::T* a, const typename S::T* b,
             typename S::T* c) {
  for (std::size_t p = 0; p < k; ++p) {
    const typename S::T* arow = a + p * m;
    const typename S::T* brow = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const typename S::T api = arow[i];
      if (api == 0) continue;
      axpy<S>(api, brow, c + i * n, n);
    }
  }
}

template <typename S>
KernelTable<typename S::T> make_table() {
  return {"avx2",     &dot<S>,     &axpy<S>,    &add<S>,    &mul<S>,
          &scale<S>,  &sum<S>,     &gemm_nn<S>, &gemm_nt<S>, &gemm_tn<S>};
}

}  // namespace

const KernelTable<float>* avx2_f32() {
  static const KernelTable<float> table = make_table<F32>();
  return &table;
}

const KernelTable<double>* avx2_f64() {
  static const KernelTable<double> table = make_table<F64>();
  return &table;
}

}  // namespace honeypot::kernels

#else

namespace honeypot::kernels {
const KernelTable<float>* avx2_f32() { return nullptr; }
const KernelTable<double>* avx2_f64() { return nullptr; }
}  // namespace honeypot::kernels

#endif
