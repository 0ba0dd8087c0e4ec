// Copyright 2026 The prefrl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <immintrin.h>

#include <cmath>

#include "prefrl/kernels.hpp"

namespace prefrl::kernels {
namespace {

inline double HorizontalSum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d swapped = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

double Dot(const double* x, const double* y, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4),
                           _mm256_loadu_pd(y + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
  }
  double acc = HorizontalSum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

void Axpy(double a, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vy = _mm256_loadu_pd(y + i);
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void Matvec(const double* m, const double* v, double* out, std::size_t rows,
            std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) out[r] = Dot(m + r * cols, v, cols);
}

double WeightedPairwiseAbsDiff(const double* x, const double* w,
                               std::size_t n) {
  const __m256d sign_mask = _mm256_set1_pd(-0.0);
  double acc = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const __m256d xj = _mm256_set1_pd(x[j]);
    __m256d row = _mm256_setzero_pd();
    std::size_t k = j + 1;
    for (; k + 4 <= n; k += 4) {
      __m256d diff = _mm256_sub_pd(xj, _mm256_loadu_pd(x + k));
      diff = _mm256_andnot_pd(sign_mask, diff);
      row = _mm256_fmadd_pd(_mm256_loadu_pd(w + k), diff, row);
    }
    double row_sum = HorizontalSum(row);
    for (; k < n; ++k) row_sum += w[k] * std::abs(x[j] - x[k]);
    acc += w[j] * row_sum;
  }
  return 2.0 * acc;
}

}  // namespace

const KernelTable& avx2_kernels() {
  static const KernelTable table{"avx2", &Dot, &Axpy, &Matvec,
                                 &WeightedPairwiseAbsDiff};
  return table;
}

}  // namespace prefrl::kernels
