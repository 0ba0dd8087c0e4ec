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

#pragma once

// Dense double-precision inner loops used by linalg, LSVI and PbTS.
//
// Every kernel has a scalar reference implementation and, on x86-64, an
// AVX2+FMA variant. The active table is chosen once at first use from the
// CPU feature bits; setting PREFRL_KERNELS=scalar in the environment forces
// the reference path. Variants agree to rounding, not bitwise: lane-wise
// accumulation reorders the sums.

#include <cstddef>
#include <span>
#include <string_view>

namespace prefrl::kernels {

struct KernelTable {
  std::string_view name;
  // sum_i x[i] * y[i]
  double (*dot)(const double* x, const double* y, std::size_t n);
  // y[i] += a * x[i]
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  // out[r] = sum_c m[r * cols + c] * v[c]   (row-major m)
  void (*matvec)(const double* m, const double* v, double* out,
                 std::size_t rows, std::size_t cols);
  // sum_j sum_k w[j] w[k] |x[j] - x[k]|
  double (*weighted_pairwise_abs_diff)(const double* x, const double* w,
                                       std::size_t n);
};

const KernelTable& scalar_table();

// Returns nullptr when the variant was not compiled in or the CPU lacks it.
const KernelTable* avx2_table();

// The table used by the library. Resolved once, thread-safe.
const KernelTable& active();

inline double dot(std::span<const double> x, std::span<const double> y) {
  return active().dot(x.data(), y.data(), x.size());
}

inline void axpy(double a, std::span<const double> x, std::span<double> y) {
  active().axpy(a, x.data(), y.data(), x.size());
}

inline void matvec(std::span<const double> m, std::span<const double> v,
                   std::span<double> out) {
  active().matvec(m.data(), v.data(), out.data(), out.size(), v.size());
}

inline double weighted_pairwise_abs_diff(std::span<const double> x,
                                         std::span<const double> w) {
  return active().weighted_pairwise_abs_diff(x.data(), w.data(), x.size());
}

}  // namespace prefrl::kernels
