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

#include "prefrl/pbts.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "prefrl/errors.hpp"
#include "prefrl/kernels.hpp"

namespace prefrl {
namespace {

constexpr std::size_t kExactPairwiseLimit = 512;

double SortedMeanDifference(const Vector& diffs, const Vector& weights) {
  std::vector<std::size_t> order(diffs.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return diffs[a] < diffs[b]; });
  double weight_below = 0.0;
  double moment_below = 0.0;
  double total = 0.0;
  for (std::size_t k : order) {
    total += weights[k] * (diffs[k] * weight_below - moment_below);
    weight_below += weights[k];
    moment_below += weights[k] * diffs[k];
  }
  return 2.0 * total;
}

}  // namespace

DirichletTransitionPosterior::DirichletTransitionPosterior(int n_states, int n_actions,
                                                           double prior)
    : n_states_(n_states), n_actions_(n_actions), prior_(prior),
      counts_(static_cast<std::size_t>(n_states) * n_actions * n_states, 0) {
  if (n_states < 1 || n_actions < 1) throw std::invalid_argument("empty state or action set");
  if (!(prior > 0.0)) throw std::invalid_argument("Dirichlet prior concentration must be positive");
}

Vector DirichletTransitionPosterior::row_concentrations(int s, int a) const {
  Vector out(n_states_);
  for (int next = 0; next < n_states_; ++next) out[next] = concentration(s, a, next);
  return out;
}

Vector DirichletTransitionPosterior::posterior_mean(int s, int a) const {
  Vector out = row_concentrations(s, a);
  const double total = std::accumulate(out.begin(), out.end(), 0.0);
  for (double& v : out) v /= total;
  return out;
}

RewardParticlePosterior::RewardParticlePosterior(std::vector<Vector> particles,
                                                 int n_actions)
    : particles_(std::move(particles)), n_actions_(n_actions) {
  if (particles_.empty()) throw std::invalid_argument("reward posterior needs a particle");
  for (const Vector& p : particles_) {
    if (p.size() != particles_.front().size()) {
      throw std::invalid_argument("reward particles differ in size");
    }
  }
  log_weights_.assign(particles_.size(), -std::log(static_cast<double>(particles_.size())));
}

Vector RewardParticlePosterior::weights() const {
  const double top = *std::max_element(log_weights_.begin(), log_weights_.end());
  if (top == -std::numeric_limits<double>::infinity()) {
    throw ModelMisspecificationError(
        "every reward particle has zero likelihood under the observed preferences");
  }
  Vector out(log_weights_.size());
  double total = 0.0;
  for (std::size_t j = 0; j < out.size(); ++j) {
    out[j] = std::exp(log_weights_[j] - top);
    total += out[j];
  }
  for (double& w : out) w /= total;
  return out;
}

DirichletTransitionPosterior update_transition_posterior(DirichletTransitionPosterior post,
                                                         const Trajectory& tau0) {
  for (std::size_t h = 0; h + 1 < tau0.steps.size(); ++h) {
    post.observe(tau0.steps[h].state, tau0.steps[h].action, tau0.steps[h + 1].state);
  }
  return post;
}

RewardParticlePosterior update_reward_posterior(RewardParticlePosterior post,
                                                const Trajectory& tau0,
                                                const Trajectory& tau1, int o, int z,
                                                const LinkFunction& link) {
  if (z == 0) return post;
  for (std::size_t j = 0; j < post.size(); ++j) {
    const Vector& r = post.particles()[j];
    const double gap = trajectory_reward(r, post.n_actions(), tau1) -
                       trajectory_reward(r, post.n_actions(), tau0);
    const double likelihood = o == 1 ? link.value(gap) : link.value(-gap);
    post.add_log_likelihood(j, std::log(likelihood));  // -inf when 0
  }
  return post;
}

PosteriorSample sample_posterior_mdp(const DirichletTransitionPosterior& transitions,
                                     const RewardParticlePosterior& rewards, Rng& rng) {
  const Vector weights = rewards.weights();
  PosteriorSample out;
  out.transition.reserve(static_cast<std::size_t>(transitions.n_states()) *
                         transitions.n_actions() * transitions.n_states());
  for (int s = 0; s < transitions.n_states(); ++s) {
    for (int a = 0; a < transitions.n_actions(); ++a) {
      const Vector row = rng.dirichlet(transitions.row_concentrations(s, a));
      out.transition.insert(out.transition.end(), row.begin(), row.end());
    }
  }
  out.particle = rng.categorical(weights);
  out.reward = rewards.particles()[out.particle];
  return out;
}

OptimalSolution plan_value_iteration(std::span<const double> transition,
                                     std::span<const double> reward, int n_states,
                                     int n_actions, int horizon, int initial_state) {
  return backward_induction(n_states, n_actions, horizon, initial_state, transition, reward);
}

double pbts_query_uncertainty(const RewardParticlePosterior& post, const Trajectory& tau0,
                              const Trajectory& tau1) {
  const Vector weights = post.weights();
  Vector diffs(post.size());
  for (std::size_t j = 0; j < post.size(); ++j) {
    const Vector& r = post.particles()[j];
    diffs[j] = trajectory_reward(r, post.n_actions(), tau0) -
               trajectory_reward(r, post.n_actions(), tau1);
  }
  const double value = post.size() <= kExactPairwiseLimit
                           ? kernels::weighted_pairwise_abs_diff(diffs, weights)
                           : SortedMeanDifference(diffs, weights);
  return std::max(0.0, value);
}

void PbtsConfig::validate() const {
  if (!(epsilon >= 0.0)) throw ConfigError("invalid PbTS configuration: epsilon must be >= 0");
  if (initial_action < 0) throw ConfigError("invalid PbTS configuration: initial_action < 0");
}

PbtsState make_pbts_state(const TabularMdp& env, std::vector<Vector> particles,
                          double prior_concentration, const PbtsConfig& config, Rng rng) {
  config.validate();
  if (config.initial_action >= env.n_actions) {
    throw ConfigError("initial_action is not a valid action of the environment");
  }
  for (const Vector& p : particles) {
    if (p.size() != env.n_pairs()) throw ConfigError("reward particle size mismatch");
  }
  PbtsState state;
  state.transitions =
      DirichletTransitionPosterior(env.n_states, env.n_actions, prior_concentration);
  state.rewards = RewardParticlePosterior(std::move(particles), env.n_actions);
  state.previous_policy = Policy(env.horizon, env.n_states, config.initial_action);
  state.rng = rng;
  return state;
}

EpisodeRecord pbts_episode(PbtsState& state, const TabularMdp& env,
                           const PreferenceOracle& oracle, const PbtsConfig& config) {
  Rng rng = state.rng;
  const PosteriorSample model = sample_posterior_mdp(state.transitions, state.rewards, rng);
  const OptimalSolution plan =
      plan_value_iteration(model.transition, model.reward, env.n_states, env.n_actions,
                           env.horizon, env.initial_state);

  EpisodeRecord record;
  record.t = state.episodes + 1;
  record.policy0 = plan.policy;
  record.policy1 = state.previous_policy;
  record.tau0 = rollout(env, record.policy0, rng);
  record.tau1 = rollout(env, record.policy1, rng);
  record.uncertainty = pbts_query_uncertainty(state.rewards, record.tau0, record.tau1);
  record.z = record.uncertainty > config.epsilon ? 1 : 0;

  RewardParticlePosterior rewards = state.rewards;
  if (record.z == 1) {
    const int o = oracle.sample(record.tau0, record.tau1, rng);
    record.queried_o = o;
    rewards = update_reward_posterior(std::move(rewards), record.tau0, record.tau1, o, 1,
                                      oracle.link);
  }
  DirichletTransitionPosterior transitions =
      update_transition_posterior(state.transitions, record.tau0);

  state.rewards = std::move(rewards);
  state.transitions = std::move(transitions);
  state.previous_policy = record.policy0;
  state.rng = rng;
  ++state.episodes;
  return record;
}

}  // namespace prefrl
