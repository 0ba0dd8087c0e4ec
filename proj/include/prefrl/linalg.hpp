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

// Symmetric positive-definite matrices kept together with their Cholesky
// factor. Inverse-mode norms, solves and correlated Gaussian draws all go
// through triangular solves; the inverse is never formed.

#include <span>
#include <vector>

#include "prefrl/rng.hpp"

namespace prefrl {

using Vector = std::vector<double>;

class PsdMatrix {
 public:
  // Pivots below this abort factorization with NumericalError.
  static constexpr double kMinPivot = 1e-12;

  PsdMatrix() = default;

  static PsdMatrix scaled_identity(int dim, double lambda);
  // `dense` is row-major dim x dim and must be symmetric.
  static PsdMatrix from_dense(int dim, Vector dense);

  int dim() const { return dim_; }
  std::span<const double> dense() const { return dense_; }
  // Lower-triangular L (row-major, upper part zero) with dense = L L^T.
  std::span<const double> factor() const { return factor_; }
  double at(int i, int j) const { return dense_[index(i, j)]; }

  // Returns this + x x^T; the factor is refreshed by a rank-one Cholesky
  // update rather than refactorization.
  PsdMatrix rank_one_update(std::span<const double> x) const;
  void rank_one_update_in_place(std::span<const double> x);

  // Solves L y = b.
  Vector solve_lower(std::span<const double> b) const;
  // Solves L^T x = y.
  Vector solve_upper(std::span<const double> y) const;

  double log_determinant() const;

  friend bool operator==(const PsdMatrix&, const PsdMatrix&) = default;

 private:
  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(i) * dim_ + j;
  }
  void factorize();
  void check_dim(std::size_t n, const char* what) const;

  int dim_ = 0;
  Vector dense_;
  Vector factor_;
};

enum class NormMode { kDirect, kInverse };

// sqrt(x^T M x) or sqrt(x^T M^{-1} x).
double mahalanobis(std::span<const double> x, const PsdMatrix& m, NormMode mode);

// mean + sqrt(scale) * z with L^T z = u, u standard normal; covariance is
// scale * M^{-1}.
Vector sample_correlated_gaussian(std::span<const double> mean, double scale,
                                  const PsdMatrix& m, Rng& rng);

// M^{-1} b.
Vector ridge_solve(const PsdMatrix& m, std::span<const double> b);

}  // namespace prefrl
