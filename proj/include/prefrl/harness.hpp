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

// Seeded experiment execution. Regret is always computed from exact dynamic
// programming values of the two executed policies under the true model.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "prefrl/env.hpp"
#include "prefrl/episode.hpp"
#include "prefrl/pbts.hpp"
#include "prefrl/pr_lsvi.hpp"

namespace prefrl {

enum class EnvKind { kTabular, kLinear, kBayesianTabular };
enum class AgentKind { kPrLsvi, kPbts, kRandom };

struct EnvSpec {
  EnvKind kind = EnvKind::kTabular;
  int n_states = 4;
  int n_actions = 2;
  int horizon = 3;
  int dim = 4;  // linear environments only
  // Environment seed; when unset the run's master seed is used.
  std::optional<std::uint64_t> seed;
};

struct PbtsAgentConfig {
  double epsilon = 0.0;
  int particles = 32;
  double prior_concentration = 1.0;
  int initial_action = 0;
};

struct RunConfig {
  AgentKind agent = AgentKind::kPrLsvi;
  PrLsviConfig pr_lsvi;
  // Use the environment's reward-norm bound as the MLE ball radius.
  bool ball_radius_from_env = true;
  double theory_delta = 0.05;
  PbtsAgentConfig pbts;
  EnvSpec env;
  LinkKind link = LinkKind::kBtl;
  int episodes = 100;
  std::uint64_t seed = 0;
  // When set, epsilon := episodes^(-beta) for either agent.
  std::optional<double> beta;

  // Throws ConfigError.
  void validate() const;
  double effective_epsilon() const;
};

struct InvariantCheck {
  std::string name;
  bool passed = true;
  std::string detail;
};

struct RunMetrics {
  std::uint64_t seed = 0;
  int episodes = 0;
  double optimal_value = 0.0;
  Vector regret_increments;
  Vector cumulative_regret;
  std::vector<int> z;
  std::vector<long long> cumulative_queries;
  double wall_clock_seconds = 0.0;
  std::vector<EpisodeRecord> records;
  std::vector<InvariantCheck> checks;
  // PR-LSVI only.
  std::optional<double> query_potential;
  std::optional<double> query_potential_bound;
  // PbTS only: the posterior after the last episode.
  std::optional<PbtsState> final_pbts;

  double final_regret() const {
    return cumulative_regret.empty() ? 0.0 : cumulative_regret.back();
  }
  long long total_queries() const {
    return cumulative_queries.empty() ? 0 : cumulative_queries.back();
  }
  bool all_checks_passed() const;
};

// The true environment a run is played in, plus what the agents need.
struct BuiltEnvironment {
  TabularMdp truth;
  std::optional<LinearMdp> linear;
  std::vector<Vector> particles;  // PbTS reward prior support
  PreferenceOracle oracle;
};

BuiltEnvironment build_environment(const RunConfig& config);

// Drives `next_episode` for `episodes` rounds and fills in exact regret,
// query series and the generic invariant checks.
RunMetrics run_agent(const TabularMdp& truth, int episodes,
                     const std::function<EpisodeRecord()>& next_episode);

RunMetrics run(const RunConfig& config);

// Both policies are fresh uniformly random deterministic policies every
// episode; never queries.
RunMetrics random_baseline_run(const RunConfig& config);

struct SweepRow {
  double beta = 0.0;
  double epsilon = 0.0;
  double mean_final_regret = 0.0;
  double stderr_final_regret = 0.0;
  double mean_total_queries = 0.0;
  double stderr_total_queries = 0.0;
  std::vector<RunMetrics> runs;  // in seed order
};

// Runs every (beta, seed) pair, up to `jobs` at a time. Output order is by
// (beta, seed) regardless of scheduling.
std::vector<SweepRow> sweep_beta(const RunConfig& base, std::span<const double> betas,
                                 std::span<const std::uint64_t> seeds, int jobs = 1);

}  // namespace prefrl
