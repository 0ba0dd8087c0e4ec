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

// Reward-parameter maximum likelihood over queried preference pairs:
//
//   argmax_{||theta|| <= B}  sum_s Z_s ln( o_s Phi(dphi_s^T theta)
//                                          + (1 - o_s) Phi(-dphi_s^T theta) )
//
// with dphi = phi(tau^1) - phi(tau^0). Solved by projected gradient ascent.

#include <optional>
#include <span>
#include <vector>

#include "prefrl/env.hpp"

namespace prefrl {

struct PreferenceRecord {
  Vector delta_phi;  // phi(tau^1) - phi(tau^0)
  int o = 0;         // 1 when tau^1 was preferred
  int z = 0;         // 1 when the pair was queried
};

class PreferenceDataset {
 public:
  explicit PreferenceDataset(int dim = 0) : dim_(dim) {}

  int dim() const { return dim_; }
  // Throws std::invalid_argument on a length mismatch or o, z outside {0, 1}.
  void add(PreferenceRecord record);
  std::span<const PreferenceRecord> records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  std::size_t queried() const { return queried_; }

 private:
  int dim_;
  std::size_t queried_ = 0;
  std::vector<PreferenceRecord> records_;
};

struct MleConfig {
  double ball_radius = 1.0;
  // Defaults to 0.1 / sqrt(1 + n) for n queried records.
  std::optional<double> step_size;
  int max_iterations = 500;
  double gradient_tolerance = 1e-8;

  void validate() const;
};

struct MleResult {
  Vector theta;
  double log_likelihood = 0.0;
  int iterations = 0;
  bool converged = false;
  // Affine-link arguments pushed to the domain edge during the solve.
  int clamp_warnings = 0;
};

// Throws std::invalid_argument if an affine-link argument leaves [-1, 1].
double log_likelihood(std::span<const double> theta, const PreferenceDataset& data,
                      const LinkFunction& link);

Vector log_likelihood_gradient(std::span<const double> theta,
                               const PreferenceDataset& data,
                               const LinkFunction& link);

// Projected gradient ascent from `initial` (the origin when empty). The
// step halves whenever a step would lower the objective and doubles back
// toward the base step after a step accepted without halving, so the
// iterates ascend monotonically. Throws NumericalError on a non-finite
// objective.
MleResult mle_fit(const PreferenceDataset& data, const LinkFunction& link,
                  const MleConfig& config, std::span<const double> initial = {});

// Euclidean projection onto {||x|| <= radius}.
void project_to_ball(std::span<double> x, double radius);

}  // namespace prefrl
