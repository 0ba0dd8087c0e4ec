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

// Finite-horizon environments, deterministic policies, exact dynamic
// programming, and the Bernoulli preference oracle.
//
// Steps are 0-indexed in code: step h in [0, H) corresponds to the 1-indexed
// step h + 1, so the number of steps remaining after step h is H - h - 1.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "prefrl/rng.hpp"

namespace prefrl {

using Vector = std::vector<double>;

struct StateAction {
  int state = 0;
  int action = 0;
  friend bool operator==(const StateAction&, const StateAction&) = default;
};

struct Trajectory {
  std::vector<StateAction> steps;
  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

// Deterministic non-stationary policy: one action per (step, state).
class Policy {
 public:
  Policy() = default;
  Policy(int horizon, int n_states, int action = 0)
      : horizon_(horizon), n_states_(n_states),
        actions_(static_cast<std::size_t>(horizon) * n_states, action) {}

  int horizon() const { return horizon_; }
  int n_states() const { return n_states_; }
  int action(int h, int s) const { return actions_[index(h, s)]; }
  void set_action(int h, int s, int a) { actions_[index(h, s)] = a; }
  std::span<const int> actions() const { return actions_; }

  // FNV-1a over the action table; stable across runs and platforms.
  std::uint64_t hash() const;

  friend bool operator==(const Policy&, const Policy&) = default;

 private:
  std::size_t index(int h, int s) const {
    return static_cast<std::size_t>(h) * n_states_ + s;
  }
  int horizon_ = 0;
  int n_states_ = 0;
  std::vector<int> actions_;
};

struct TabularMdp {
  int n_states = 0;
  int n_actions = 0;
  int horizon = 0;
  int initial_state = 0;
  // transition[(s * A + a) * S + s'] = P(s' | s, a)
  Vector transition;
  // reward[s * A + a] in [0, 1]
  Vector reward;

  std::span<const double> row(int s, int a) const {
    return {transition.data() + pair_index(s, a) * n_states,
            static_cast<std::size_t>(n_states)};
  }
  double reward_at(int s, int a) const { return reward[pair_index(s, a)]; }
  std::size_t pair_index(int s, int a) const {
    return static_cast<std::size_t>(s) * n_actions + a;
  }
  std::size_t n_pairs() const {
    return static_cast<std::size_t>(n_states) * n_actions;
  }

  // Throws std::invalid_argument on any violated invariant (row sums within
  // 1e-12, non-negative entries, rewards in [0, 1], sizes).
  void validate() const;

  friend bool operator==(const TabularMdp&, const TabularMdp&) = default;
};

// Linear MDP with P(s'|s,a) = phi(s,a)^T mu(s') and r(s,a) = phi(s,a)^T theta.
// The induced tabular view is materialized at construction; rollouts and
// exact values go through it.
class LinearMdp {
 public:
  LinearMdp() = default;
  // features: row-major (n_states * n_actions) x dim
  // mu: row-major dim x n_states
  LinearMdp(int dim, int n_states, int n_actions, int horizon, Vector features,
            Vector mu, Vector theta, double reward_bound, double feature_scale);

  int dim() const { return dim_; }
  int n_states() const { return induced_.n_states; }
  int n_actions() const { return induced_.n_actions; }
  int horizon() const { return induced_.horizon; }
  double reward_bound() const { return reward_bound_; }
  double feature_scale() const { return feature_scale_; }
  std::span<const double> features() const { return features_; }
  std::span<const double> mu() const { return mu_; }
  std::span<const double> theta() const { return theta_; }
  std::span<const double> feature(int s, int a) const {
    return {features_.data() + induced_.pair_index(s, a) * dim_,
            static_cast<std::size_t>(dim_)};
  }
  const TabularMdp& induced() const { return induced_; }

  // Throws std::invalid_argument if the linear-MDP invariants fail.
  void validate() const;

  friend bool operator==(const LinearMdp&, const LinearMdp&) = default;

 private:
  int dim_ = 0;
  Vector features_;
  Vector mu_;
  Vector theta_;
  double reward_bound_ = 0.0;
  double feature_scale_ = 1.0;
  TabularMdp induced_;
};

enum class LinkKind { kBtl, kAffine };

// Monotone link Phi(scale * x). The affine link (x + 1) / 2 is only defined
// on scale * x in [-1, 1].
class LinkFunction {
 public:
  static LinkFunction btl(double scale = 1.0) { return {LinkKind::kBtl, scale}; }
  static LinkFunction affine(double scale = 1.0) { return {LinkKind::kAffine, scale}; }

  LinkKind kind() const { return kind_; }
  double scale() const { return scale_; }

  bool in_domain(double x) const;
  // Throws std::invalid_argument outside the domain.
  double value(double x) const;
  double derivative(double x) const;

  std::string name() const;

 private:
  LinkFunction(LinkKind kind, double scale) : kind_(kind), scale_(scale) {}
  LinkKind kind_;
  double scale_;
};

struct LinkConstants {
  double kappa = 0.0;      // 1 / min Phi'
  double kappa_bar = 0.0;  // 1 / max Phi'
};

// BTL: kappa = 2 + e^-H + e^H, kappa_bar = 4. Affine on [-1, 1]: (2, 2).
LinkConstants link_constants(const LinkFunction& link, int horizon);

TabularMdp random_tabular_mdp(int n_states, int n_actions, int horizon, Rng& rng);

// One-hot features scaled by 1/H; theta and mu scaled by H.
LinearMdp tabular_to_linear(const TabularMdp& mdp);

// Soft state aggregation: simplex features, latent next-state distributions.
LinearMdp random_linear_mdp(int dim, int n_states, int n_actions, int horizon,
                            Rng& rng);

// Samples H - 1 transitions; the state after the last step is never drawn.
Trajectory rollout(const TabularMdp& mdp, const Policy& policy, Rng& rng);
inline Trajectory rollout(const LinearMdp& mdp, const Policy& policy, Rng& rng) {
  return rollout(mdp.induced(), policy, rng);
}

Vector trajectory_feature(const LinearMdp& mdp, const Trajectory& tau);

// Sum of reward[s * n_actions + a] along the trajectory.
double trajectory_reward(std::span<const double> reward, int n_actions,
                         const Trajectory& tau);

// Returns o = 1 (tau1 preferred) with probability Phi(r(tau1) - r(tau0)).
int preference_sample(const LinkFunction& link, const TabularMdp& mdp,
                      const Trajectory& tau0, const Trajectory& tau1, Rng& rng);

// Wraps the true reward and link for the learners.
struct PreferenceOracle {
  LinkFunction link = LinkFunction::btl();
  TabularMdp mdp;

  int sample(const Trajectory& tau0, const Trajectory& tau1, Rng& rng) const {
    return preference_sample(link, mdp, tau0, tau1, rng);
  }
};

// V^pi(s1) by backward induction under the mdp's kernel and the given reward
// table (same layout as TabularMdp::reward).
double exact_policy_value(const TabularMdp& mdp, std::span<const double> reward,
                          const Policy& policy);

struct OptimalSolution {
  double value = 0.0;
  Policy policy;
};

// Backward induction over an explicit kernel; argmax ties go to the lowest
// action index.
OptimalSolution backward_induction(int n_states, int n_actions, int horizon,
                                   int initial_state,
                                   std::span<const double> transition,
                                   std::span<const double> reward);

OptimalSolution optimal_value_and_policy(const TabularMdp& mdp,
                                         std::span<const double> reward);

}  // namespace prefrl
