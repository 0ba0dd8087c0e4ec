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

#include "prefrl/env.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "prefrl/kernels.hpp"

namespace prefrl {
namespace {

constexpr double kRowTolerance = 1e-12;

void CheckDims(int n_states, int n_actions, int horizon) {
  if (n_states < 1 || n_actions < 1 || horizon < 1) {
    throw std::invalid_argument("environment dimensions must be >= 1 (got S=" +
                                std::to_string(n_states) + ", A=" +
                                std::to_string(n_actions) + ", H=" +
                                std::to_string(horizon) + ")");
  }
}

}  // namespace

std::uint64_t Policy::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int byte = 0; byte < 8; ++byte) {
      h ^= (v >> (8 * byte)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  mix(static_cast<std::uint64_t>(horizon_));
  mix(static_cast<std::uint64_t>(n_states_));
  for (int a : actions_) mix(static_cast<std::uint64_t>(a));
  return h;
}

void TabularMdp::validate() const {
  CheckDims(n_states, n_actions, horizon);
  if (initial_state < 0 || initial_state >= n_states) {
    throw std::invalid_argument("initial state out of range");
  }
  if (transition.size() != n_pairs() * n_states || reward.size() != n_pairs()) {
    throw std::invalid_argument("tabular MDP table sizes do not match dimensions");
  }
  for (int s = 0; s < n_states; ++s) {
    for (int a = 0; a < n_actions; ++a) {
      double total = 0.0;
      for (double p : row(s, a)) {
        if (!(p >= 0.0)) throw std::invalid_argument("negative transition probability");
        total += p;
      }
      if (std::abs(total - 1.0) > kRowTolerance) {
        throw std::invalid_argument("transition row (" + std::to_string(s) + "," +
                                    std::to_string(a) + ") sums to " +
                                    std::to_string(total));
      }
      const double r = reward_at(s, a);
      if (!(r >= -kRowTolerance && r <= 1.0 + kRowTolerance)) {
        throw std::invalid_argument("reward outside [0,1]");
      }
    }
  }
}

LinearMdp::LinearMdp(int dim, int n_states, int n_actions, int horizon,
                     Vector features, Vector mu, Vector theta,
                     double reward_bound, double feature_scale)
    : dim_(dim), features_(std::move(features)), mu_(std::move(mu)),
      theta_(std::move(theta)), reward_bound_(reward_bound),
      feature_scale_(feature_scale) {
  CheckDims(n_states, n_actions, horizon);
  if (dim < 1) throw std::invalid_argument("feature dimension must be >= 1");
  const std::size_t pairs = static_cast<std::size_t>(n_states) * n_actions;
  if (features_.size() != pairs * dim || mu_.size() != static_cast<std::size_t>(dim) * n_states ||
      theta_.size() != static_cast<std::size_t>(dim)) {
    throw std::invalid_argument("linear MDP table sizes do not match dimensions");
  }
  induced_.n_states = n_states;
  induced_.n_actions = n_actions;
  induced_.horizon = horizon;
  induced_.transition.assign(pairs * n_states, 0.0);
  induced_.reward.assign(pairs, 0.0);
  for (std::size_t p = 0; p < pairs; ++p) {
    std::span<const double> phi(features_.data() + p * dim, dim);
    for (int k = 0; k < dim; ++k) {
      kernels::axpy(phi[k], std::span<const double>(mu_.data() + k * n_states, n_states),
                    std::span<double>(induced_.transition.data() + p * n_states, n_states));
    }
    induced_.reward[p] = kernels::dot(phi, theta_);
  }
}

void LinearMdp::validate() const {
  induced_.validate();
  double max_norm = 0.0;
  for (std::size_t p = 0; p < induced_.n_pairs(); ++p) {
    std::span<const double> phi(features_.data() + p * dim_, dim_);
    max_norm = std::max(max_norm, std::sqrt(kernels::dot(phi, phi)));
  }
  if (max_norm > 1.0 + 1e-12) throw std::invalid_argument("feature norm exceeds 1");
  // Triangle inequality gives ||phi(tau)|| <= H max ||phi(s,a)||.
  if (max_norm * horizon() > 1.0 + 1e-12) {
    throw std::invalid_argument("trajectory feature norm can exceed 1");
  }
  if (std::sqrt(kernels::dot(theta_, theta_)) > reward_bound_ * (1.0 + 1e-12)) {
    throw std::invalid_argument("reward parameter norm exceeds its bound");
  }
}

bool LinkFunction::in_domain(double x) const {
  if (kind_ == LinkKind::kBtl) return std::isfinite(x);
  const double u = scale_ * x;
  return u >= -1.0 && u <= 1.0;
}

double LinkFunction::value(double x) const {
  if (!in_domain(x)) {
    throw std::invalid_argument("link argument " + std::to_string(x) +
                                " outside the domain of the " + name() + " link");
  }
  const double u = scale_ * x;
  if (kind_ == LinkKind::kAffine) return 0.5 * (u + 1.0);
  // Written so that value(x) + value(-x) == 1 up to a single rounding.
  if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
  const double e = std::exp(u);
  return e / (1.0 + e);
}

double LinkFunction::derivative(double x) const {
  if (!in_domain(x)) {
    throw std::invalid_argument("link argument outside the domain of the " + name() + " link");
  }
  if (kind_ == LinkKind::kAffine) return 0.5 * scale_;
  const double u = scale_ * x;
  const double e = std::exp(-std::abs(u));
  return scale_ * e / ((1.0 + e) * (1.0 + e));
}

std::string LinkFunction::name() const {
  return kind_ == LinkKind::kBtl ? "btl" : "affine";
}

LinkConstants link_constants(const LinkFunction& link, int horizon) {
  if (link.kind() == LinkKind::kAffine) return {2.0, 2.0};
  const double h = static_cast<double>(horizon);
  return {2.0 + std::exp(-h) + std::exp(h), 4.0};
}

TabularMdp random_tabular_mdp(int n_states, int n_actions, int horizon, Rng& rng) {
  CheckDims(n_states, n_actions, horizon);
  TabularMdp mdp;
  mdp.n_states = n_states;
  mdp.n_actions = n_actions;
  mdp.horizon = horizon;
  const Vector ones(n_states, 1.0);
  mdp.transition.reserve(mdp.n_pairs() * n_states);
  for (std::size_t p = 0; p < mdp.n_pairs(); ++p) {
    Vector row = rng.dirichlet(ones);
    mdp.transition.insert(mdp.transition.end(), row.begin(), row.end());
  }
  mdp.reward.resize(mdp.n_pairs());
  for (double& r : mdp.reward) r = rng.uniform();
  return mdp;
}

LinearMdp tabular_to_linear(const TabularMdp& mdp) {
  const int dim = static_cast<int>(mdp.n_pairs());
  const double h = static_cast<double>(mdp.horizon);
  Vector features(static_cast<std::size_t>(dim) * dim, 0.0);
  Vector mu(static_cast<std::size_t>(dim) * mdp.n_states, 0.0);
  Vector theta(dim, 0.0);
  for (int p = 0; p < dim; ++p) {
    features[static_cast<std::size_t>(p) * dim + p] = 1.0 / h;
    theta[p] = h * mdp.reward[p];
    for (int s = 0; s < mdp.n_states; ++s) {
      mu[static_cast<std::size_t>(p) * mdp.n_states + s] =
          h * mdp.transition[static_cast<std::size_t>(p) * mdp.n_states + s];
    }
  }
  LinearMdp out(dim, mdp.n_states, mdp.n_actions, mdp.horizon, std::move(features),
                std::move(mu), std::move(theta), h * std::sqrt(static_cast<double>(dim)),
                1.0 / h);
  return out;
}

LinearMdp random_linear_mdp(int dim, int n_states, int n_actions, int horizon, Rng& rng) {
  CheckDims(n_states, n_actions, horizon);
  if (dim < 1) throw std::invalid_argument("feature dimension must be >= 1");
  const double h = static_cast<double>(horizon);
  const std::size_t pairs = static_cast<std::size_t>(n_states) * n_actions;
  Vector features;
  features.reserve(pairs * dim);
  const Vector latent_alpha(dim, 1.0);
  for (std::size_t p = 0; p < pairs; ++p) {
    for (double v : rng.dirichlet(latent_alpha)) features.push_back(v / h);
  }
  Vector mu;
  mu.reserve(static_cast<std::size_t>(dim) * n_states);
  const Vector state_alpha(n_states, 1.0);
  for (int k = 0; k < dim; ++k) {
    for (double v : rng.dirichlet(state_alpha)) mu.push_back(v * h);
  }
  Vector theta(dim);
  for (double& v : theta) v = h * rng.uniform();
  return LinearMdp(dim, n_states, n_actions, horizon, std::move(features), std::move(mu),
                   std::move(theta), h * std::sqrt(static_cast<double>(dim)), 1.0 / h);
}

Trajectory rollout(const TabularMdp& mdp, const Policy& policy, Rng& rng) {
  Trajectory tau;
  tau.steps.reserve(mdp.horizon);
  int s = mdp.initial_state;
  for (int h = 0; h < mdp.horizon; ++h) {
    const int a = policy.action(h, s);
    tau.steps.push_back({s, a});
    if (h + 1 < mdp.horizon) s = static_cast<int>(rng.categorical(mdp.row(s, a)));
  }
  return tau;
}

Vector trajectory_feature(const LinearMdp& mdp, const Trajectory& tau) {
  if (static_cast<int>(tau.steps.size()) != mdp.horizon()) {
    throw std::invalid_argument("trajectory length differs from the horizon");
  }
  Vector out(mdp.dim(), 0.0);
  for (const StateAction& sa : tau.steps) {
    kernels::axpy(1.0, mdp.feature(sa.state, sa.action), out);
  }
  return out;
}

double trajectory_reward(std::span<const double> reward, int n_actions,
                         const Trajectory& tau) {
  double total = 0.0;
  for (const StateAction& sa : tau.steps) {
    total += reward[static_cast<std::size_t>(sa.state) * n_actions + sa.action];
  }
  return total;
}

int preference_sample(const LinkFunction& link, const TabularMdp& mdp,
                      const Trajectory& tau0, const Trajectory& tau1, Rng& rng) {
  if (static_cast<int>(tau0.steps.size()) != mdp.horizon ||
      static_cast<int>(tau1.steps.size()) != mdp.horizon) {
    throw std::invalid_argument("trajectory length differs from the horizon");
  }
  const double gap = trajectory_reward(mdp.reward, mdp.n_actions, tau1) -
                     trajectory_reward(mdp.reward, mdp.n_actions, tau0);
  const double p = link.value(gap);
  return rng.uniform() < p ? 1 : 0;
}

double exact_policy_value(const TabularMdp& mdp, std::span<const double> reward,
                          const Policy& policy) {
  const int n_states = mdp.n_states;
  Vector next(n_states, 0.0);
  Vector current(n_states, 0.0);
  for (int h = mdp.horizon - 1; h >= 0; --h) {
    for (int s = 0; s < n_states; ++s) {
      const int a = policy.action(h, s);
      current[s] = reward[mdp.pair_index(s, a)] + kernels::dot(mdp.row(s, a), next);
    }
    std::swap(next, current);
  }
  return next[mdp.initial_state];
}

OptimalSolution backward_induction(int n_states, int n_actions, int horizon,
                                   int initial_state,
                                   std::span<const double> transition,
                                   std::span<const double> reward) {
  OptimalSolution out{0.0, Policy(horizon, n_states, 0)};
  Vector next(n_states, 0.0);
  Vector current(n_states, 0.0);
  for (int h = horizon - 1; h >= 0; --h) {
    for (int s = 0; s < n_states; ++s) {
      double best = -std::numeric_limits<double>::infinity();
      int best_action = 0;
      for (int a = 0; a < n_actions; ++a) {
        const std::size_t p = static_cast<std::size_t>(s) * n_actions + a;
        const double q = reward[p] +
                         kernels::dot(transition.subspan(p * n_states, n_states), next);
        if (q > best) {
          best = q;
          best_action = a;
        }
      }
      current[s] = best;
      out.policy.set_action(h, s, best_action);
    }
    std::swap(next, current);
  }
  out.value = next[initial_state];
  return out;
}

OptimalSolution optimal_value_and_policy(const TabularMdp& mdp,
                                         std::span<const double> reward) {
  return backward_induction(mdp.n_states, mdp.n_actions, mdp.horizon,
                            mdp.initial_state, mdp.transition, reward);
}

}  // namespace prefrl
