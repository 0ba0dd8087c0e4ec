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

// Preference-based randomized least-squares value iteration for linear MDPs
// with a finite action set.
//
// Each episode: fit the reward MLE on queried pairs, perturb it with
// Gaussian noise shaped by the trajectory-difference covariance, run
// randomized truncated LSVI backwards over the pi^0 transition data, act
// greedily, compare against last episode's greedy policy, and query the
// preference only when the expected disagreement of two perturbed reward
// models exceeds epsilon.

#include <cstdint>
#include <span>
#include <vector>

#include "prefrl/env.hpp"
#include "prefrl/episode.hpp"
#include "prefrl/linalg.hpp"
#include "prefrl/reward_mle.hpp"
#include "prefrl/rng.hpp"

namespace prefrl {

enum class QueryMode { kClosedForm, kMonteCarlo };
enum class HyperparamMode { kPractical, kTheory };

struct PrLsviConfig {
  double sigma_r = 0.5;
  double sigma_p = 1.0;
  double epsilon = 0.0;
  double alpha_l = 0.25;
  double alpha_u = 0.5;
  double ridge_lambda = 1.0;
  double ball_radius = 1.0;
  QueryMode query_mode = QueryMode::kClosedForm;
  int mc_samples = 1000;
  HyperparamMode mode = HyperparamMode::kPractical;
  // Comparator for episode 1: every (h, s) plays this action.
  int initial_action = 0;
  int mle_max_iterations = 500;
  double mle_tolerance = 1e-8;

  // Throws ConfigError naming the first violated constraint.
  void validate() const;
};

struct TransitionSample {
  Vector feature;  // phi(s_h, a_h)
  int next_state = 0;
};

struct PrLsviState {
  int episodes = 0;
  PsdMatrix trajectory_cov;            // ridge I + queried dphi dphi^T
  std::vector<PsdMatrix> step_cov;     // per step: ridge I + phi phi^T
  PreferenceDataset preferences;       // every round, with its Z flag
  std::vector<std::vector<TransitionSample>> transitions;  // steps 0..H-2
  Policy previous_greedy;
  Vector theta_hat;
  Rng rng;
  // sum_t Z_t min(1, ||dphi_t||^2 in the inverse trajectory covariance)
  double query_potential = 0.0;
  int mle_clamp_warnings = 0;
};

PrLsviState make_pr_lsvi_state(const LinearMdp& env, const PrLsviConfig& config,
                               Rng rng);

// Truncated continuation value. `norm` is ||phi||_{Sigma^{-1}}, `linear` is
// phi^T theta_P and `cap` the number of remaining steps.
double omega_blend(double norm, double linear, double alpha_l, double alpha_u,
                   double cap);

// Step h is 0-based, so the cap is H - h - 1.
double omega(std::span<const double> phi, std::span<const double> theta_p,
             const PsdMatrix& step_cov, double alpha_l, double alpha_u, int h,
             int horizon);

struct RandomizedValueFn {
  Vector theta_r;                      // perturbed reward parameter
  std::vector<Vector> theta_p_hat;     // per step, zero at the last step
  std::vector<Vector> theta_p;         // perturbed, zero at the last step
  std::vector<Vector> q;               // per step, indexed s * A + a
  std::vector<Vector> feature_norm;    // per step ||phi(s,a)||_{Sigma_h^{-1}}
  double alpha_l = 0.0;
  double alpha_u = 0.0;
  int horizon = 0;
  int n_actions = 0;

  double q_value(int h, int s, int a) const {
    return q[h][static_cast<std::size_t>(s) * n_actions + a];
  }
  double v_value(int h, int s) const;
};

RandomizedValueFn lsvi_backward(const PrLsviState& state,
                                std::span<const double> theta_r,
                                const PrLsviConfig& config, const LinearMdp& env,
                                Rng& rng);

// Argmax of Q per (h, s), ties to the lowest action.
Policy greedy_policy(const RandomizedValueFn& vf, const LinearMdp& env);

// E|dphi^T (theta0 - theta1)| for theta0, theta1 ~ N(., sigma_r^2 Sigma^{-1})
// in closed form: 2 sigma_r / sqrt(pi) * ||dphi||_{Sigma^{-1}}.
double query_uncertainty_closed(std::span<const double> delta_phi,
                                const PsdMatrix& cov, double sigma_r);

// Monte-Carlo estimate of the same expectation from `samples` pairs. The
// center cancels in the difference and does not affect the draws.
double query_uncertainty_mc(std::span<const double> theta_hat, double sigma_r,
                            const PsdMatrix& cov, std::span<const double> delta_phi,
                            int samples, Rng& rng);

// Runs one episode and commits it to `state` only if every step succeeds.
EpisodeRecord pr_lsvi_episode(PrLsviState& state, const LinearMdp& env,
                              const PreferenceOracle& oracle,
                              const PrLsviConfig& config);

struct TheoryHyperparams {
  PrLsviConfig config;
  double eps_xi_r = 0.0;
  double eps_eta_r = 0.0;
  double v_max = 0.0;
  double eps_lambda = 0.0;
  double eps_xi_p = 0.0;
  double eps_eta_p = 0.0;
  double iota = 0.0;
  double chi = 0.0;
  int iterations = 0;
  std::vector<double> chi_trajectory;
};

// Worst-case constants; chi is found by fixed-point iteration. Throws
// ConfigError (with the chi trajectory) if it does not settle within 100
// iterations.
TheoryHyperparams theory_hyperparams(int dim, int horizon, int episodes,
                                     double ball_radius, double kappa,
                                     double kappa_bar, double delta = 0.05);

}  // namespace prefrl
