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

#include "prefrl/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "prefrl/errors.hpp"
#include "prefrl/kernels.hpp"

namespace prefrl {

PsdMatrix PsdMatrix::scaled_identity(int dim, double lambda) {
  if (dim < 1) throw std::invalid_argument("matrix dimension must be >= 1");
  if (!(lambda > 0.0)) throw std::invalid_argument("ridge parameter must be positive");
  PsdMatrix out;
  out.dim_ = dim;
  out.dense_.assign(static_cast<std::size_t>(dim) * dim, 0.0);
  out.factor_.assign(out.dense_.size(), 0.0);
  const double root = std::sqrt(lambda);
  for (int i = 0; i < dim; ++i) {
    out.dense_[out.index(i, i)] = lambda;
    out.factor_[out.index(i, i)] = root;
  }
  if (root < kMinPivot) throw NumericalError("ridge parameter below the pivot guard");
  return out;
}

PsdMatrix PsdMatrix::from_dense(int dim, Vector dense) {
  if (dim < 1 || dense.size() != static_cast<std::size_t>(dim) * dim) {
    throw std::invalid_argument("dense matrix size does not match dimension");
  }
  PsdMatrix out;
  out.dim_ = dim;
  out.dense_ = std::move(dense);
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j < i; ++j) {
      const double a = out.dense_[out.index(i, j)];
      const double b = out.dense_[out.index(j, i)];
      if (std::abs(a - b) > 1e-10 * std::max({1.0, std::abs(a), std::abs(b)})) {
        throw std::invalid_argument("matrix is not symmetric");
      }
    }
  }
  out.factorize();
  return out;
}

void PsdMatrix::factorize() {
  factor_.assign(dense_.size(), 0.0);
  for (int j = 0; j < dim_; ++j) {
    std::span<const double> row_j(factor_.data() + index(j, 0), j);
    const double diag = dense_[index(j, j)] - kernels::dot(row_j, row_j);
    if (!(diag > kMinPivot * kMinPivot)) {
      throw NumericalError("Cholesky pivot " + std::to_string(j) +
                           " fell below 1e-12 (matrix not positive definite)");
    }
    const double pivot = std::sqrt(diag);
    factor_[index(j, j)] = pivot;
    for (int i = j + 1; i < dim_; ++i) {
      std::span<const double> row_i(factor_.data() + index(i, 0), j);
      factor_[index(i, j)] = (dense_[index(i, j)] - kernels::dot(row_i, row_j)) / pivot;
    }
  }
}

void PsdMatrix::check_dim(std::size_t n, const char* what) const {
  if (n != static_cast<std::size_t>(dim_)) {
    throw std::invalid_argument(std::string(what) + ": dimension mismatch (expected " +
                                std::to_string(dim_) + ", got " + std::to_string(n) + ")");
  }
}

PsdMatrix PsdMatrix::rank_one_update(std::span<const double> x) const {
  PsdMatrix out = *this;
  out.rank_one_update_in_place(x);
  return out;
}

void PsdMatrix::rank_one_update_in_place(std::span<const double> x) {
  check_dim(x.size(), "rank_one_update");
  for (int i = 0; i < dim_; ++i) {
    kernels::axpy(x[i], x, std::span<double>(dense_.data() + index(i, 0), dim_));
  }
  Vector work(x.begin(), x.end());
  for (int k = 0; k < dim_; ++k) {
    const double lkk = factor_[index(k, k)];
    const double r = std::hypot(lkk, work[k]);
    const double c = r / lkk;
    const double s = work[k] / lkk;
    factor_[index(k, k)] = r;
    for (int i = k + 1; i < dim_; ++i) {
      double& lik = factor_[index(i, k)];
      lik = (lik + s * work[i]) / c;
      work[i] = c * work[i] - s * lik;
    }
  }
}

Vector PsdMatrix::solve_lower(std::span<const double> b) const {
  check_dim(b.size(), "solve_lower");
  Vector y(b.begin(), b.end());
  for (int i = 0; i < dim_; ++i) {
    std::span<const double> row(factor_.data() + index(i, 0), i);
    y[i] = (y[i] - kernels::dot(row, std::span<const double>(y.data(), i))) /
           factor_[index(i, i)];
  }
  return y;
}

Vector PsdMatrix::solve_upper(std::span<const double> y) const {
  check_dim(y.size(), "solve_upper");
  // Column-oriented back substitution: row j of L is column j of L^T.
  Vector x(y.begin(), y.end());
  for (int j = dim_ - 1; j >= 0; --j) {
    x[j] /= factor_[index(j, j)];
    kernels::axpy(-x[j], std::span<const double>(factor_.data() + index(j, 0), j),
                  std::span<double>(x.data(), j));
  }
  return x;
}

double PsdMatrix::log_determinant() const {
  double total = 0.0;
  for (int i = 0; i < dim_; ++i) total += std::log(factor_[index(i, i)]);
  return 2.0 * total;
}

double mahalanobis(std::span<const double> x, const PsdMatrix& m, NormMode mode) {
  if (x.size() != static_cast<std::size_t>(m.dim())) {
    throw std::invalid_argument("mahalanobis: dimension mismatch");
  }
  if (mode == NormMode::kInverse) {
    const Vector y = m.solve_lower(x);
    return std::sqrt(kernels::dot(y, y));
  }
  Vector mx(x.size());
  kernels::matvec(m.dense(), x, mx);
  return std::sqrt(std::max(0.0, kernels::dot(x, mx)));
}

Vector sample_correlated_gaussian(std::span<const double> mean, double scale,
                                  const PsdMatrix& m, Rng& rng) {
  if (mean.size() != static_cast<std::size_t>(m.dim())) {
    throw std::invalid_argument("sample_correlated_gaussian: dimension mismatch");
  }
  if (!(scale > 0.0)) throw std::invalid_argument("sample scale must be positive");
  Vector u(mean.size());
  for (double& v : u) v = rng.normal();
  Vector z = m.solve_upper(u);
  Vector out(mean.begin(), mean.end());
  kernels::axpy(std::sqrt(scale), z, out);
  return out;
}

Vector ridge_solve(const PsdMatrix& m, std::span<const double> b) {
  return m.solve_upper(m.solve_lower(b));
}

}  // namespace prefrl
