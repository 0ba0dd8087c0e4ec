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

#include <cmath>

#include "prefrl/kernels.hpp"

namespace prefrl::kernels {
namespace {

double Dot(const double* x, const double* y, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

void Axpy(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void Matvec(const double* m, const double* v, double* out, std::size_t rows,
            std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) out[r] = Dot(m + r * cols, v, cols);
}

double WeightedPairwiseAbsDiff(const double* x, const double* w,
                               std::size_t n) {
  // Symmetric, so sum the strict upper triangle and double it.
  double acc = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    double row = 0.0;
    for (std::size_t k = j + 1; k < n; ++k) row += w[k] * std::abs(x[j] - x[k]);
    acc += w[j] * row;
  }
  return 2.0 * acc;
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{"scalar", &Dot, &Axpy, &Matvec,
                                 &WeightedPairwiseAbsDiff};
  return table;
}

}  // namespace prefrl::kernels
