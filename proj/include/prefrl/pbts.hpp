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

// Preference-based Thompson sampling on tabular MDPs: Dirichlet posterior
// over transition rows (pi^0 transitions only), particle posterior over
// reward tables (queried rounds only), exact planning on the sampled model,
// and a query rule driven by the posterior spread of the reward difference.

#include <span>
#include <vector>

#include "prefrl/env.hpp"
#include "prefrl/episode.hpp"
#include "prefrl/rng.hpp"

namespace prefrl {

class DirichletTransitionPosterior {
 public:
  DirichletTransitionPosterior() = default;
  DirichletTransitionPosterior(int n_states, int n_actions, double prior = 1.0);

  int n_states() const { return n_states_; }
  int n_actions() const { return n_actions_; }
  double prior() const { return prior_; }
  // counts[(s * A + a) * S + s']
  std::span<const long long> counts() const { return counts_; }
  double concentration(int s, int a, int next) const {
    return prior_ + static_cast<double>(counts_[index(s, a, next)]);
  }
  Vector row_concentrations(int s, int a) const;
  Vector posterior_mean(int s, int a) const;

  void observe(int s, int a, int next) { ++counts_[index(s, a, next)]; }

  friend bool operator==(const DirichletTransitionPosterior&,
                         const DirichletTransitionPosterior&) = default;

 private:
  std::size_t index(int s, int a, int next) const {
    return (static_cast<std::size_t>(s) * n_actions_ + a) * n_states_ + next;
  }
  int n_states_ = 0;
  int n_actions_ = 0;
  double prior_ = 1.0;
  std::vector<long long> counts_;
};

class RewardParticlePosterior {
 public:
  RewardParticlePosterior() = default;
  // Uniform prior over the given reward tables (each s * A + a, in [0,1]).
  RewardParticlePosterior(std::vector<Vector> particles, int n_actions);

  std::size_t size() const { return particles_.size(); }
  int n_actions() const { return n_actions_; }
  std::span<const Vector> particles() const { return particles_; }
  std::span<const double> log_weights() const { return log_weights_; }
  // Normalized weights; particles at -inf get exactly zero. Throws
  // ModelMisspecificationError when every particle is at -inf.
  Vector weights() const;

  void add_log_likelihood(std::size_t j, double value) { log_weights_[j] += value; }

  friend bool operator==(const RewardParticlePosterior&,
                         const RewardParticlePosterior&) = default;

 private:
  std::vector<Vector> particles_;
  Vector log_weights_;
  int n_actions_ = 0;
};

DirichletTransitionPosterior update_transition_posterior(
    DirichletTransitionPosterior post, const Trajectory& tau0);

// Identity when z == 0. Otherwise each particle's log-weight gains
// ln(o Phi(r(tau1) - r(tau0)) + (1 - o) Phi(r(tau0) - r(tau1))).
RewardParticlePosterior update_reward_posterior(RewardParticlePosterior post,
                                                const Trajectory& tau0,
                                                const Trajectory& tau1, int o, int z,
                                                const LinkFunction& link);

struct PosteriorSample {
  Vector transition;  // same layout as TabularMdp::transition
  Vector reward;
  std::size_t particle = 0;
};

// Each transition row is an independent Dirichlet draw; the reward is one
// particle drawn from the normalized weights.
PosteriorSample sample_posterior_mdp(const DirichletTransitionPosterior& transitions,
                                     const RewardParticlePosterior& rewards, Rng& rng);

// Finite-horizon backward induction; ties to the lowest action.
OptimalSolution plan_value_iteration(std::span<const double> transition,
                                     std::span<const double> reward, int n_states,
                                     int n_actions, int horizon, int initial_state = 0);

// sum_j sum_k w_j w_k |D_j - D_k| with D_j = r_j(tau0) - r_j(tau1). Exact;
// O(J^2) through the SIMD kernel up to 512 particles, sorted O(J log J)
// beyond.
double pbts_query_uncertainty(const RewardParticlePosterior& post,
                              const Trajectory& tau0, const Trajectory& tau1);

struct PbtsConfig {
  double epsilon = 0.0;
  int initial_action = 0;
  void validate() const;
};

struct PbtsState {
  DirichletTransitionPosterior transitions;
  RewardParticlePosterior rewards;
  Policy previous_policy;
  int episodes = 0;
  Rng rng;
};

PbtsState make_pbts_state(const TabularMdp& env, std::vector<Vector> particles,
                          double prior_concentration, const PbtsConfig& config, Rng rng);

// Commits to `state` only if every step succeeds.
EpisodeRecord pbts_episode(PbtsState& state, const TabularMdp& env,
                           const PreferenceOracle& oracle, const PbtsConfig& config);

}  // namespace prefrl
