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

#include <cmath>
#include <optional>

#include "prefrl/env.hpp"

namespace prefrl {

// Everything one episode of either learner produced. The harness fills in
// regret_increment from exact values of the two executed policies.
struct EpisodeRecord {
  int t = 0;  // 1-based episode index
  int z = 0;
  std::optional<int> queried_o;
  double uncertainty = 0.0;
  double regret_increment = 0.0;
  Policy policy0;
  Policy policy1;
  Trajectory tau0;
  Trajectory tau1;
  // PR-LSVI only: ||phi(tau0) - phi(tau1)|| in the inverse trajectory
  // covariance before this episode's update.
  double query_norm = std::nan("");
};

}  // namespace prefrl
