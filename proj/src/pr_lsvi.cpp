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

#include "prefrl/pr_lsvi.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "prefrl/errors.hpp"
#include "prefrl/kernels.hpp"

namespace prefrl {
namespace {

void Require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("invalid PR-LSVI configuration: " + what);
}

// Q-table for one step given the perturbed continuation parameter.
void FillStep(const LinearMdp& env, std::span<const double> reward_estimate,
              std::span<const double> theta_p, const PsdMatrix& cov, double alpha_l,
              double alpha_u, double cap, Vector& q, Vector& norms) {
  const std::size_t pairs = env.induced().n_pairs();
  Vector linear(pairs);
  kernels::matvec(env.features(), theta_p, linear);
  q.resize(pairs);
  norms.resize(pairs);
  for (std::size_t p = 0; p < pairs; ++p) {
    std::span<const double> phi = env.features().subspan(p * env.dim(), env.dim());
    norms[p] = mahalanobis(phi, cov, NormMode::kInverse);
    q[p] = reward_estimate[p] + omega_blend(norms[p], linear[p], alpha_l, alpha_u, cap);
  }
}

}  // namespace

void PrLsviConfig::validate() const {
  Require(sigma_r > 0.0, "sigma_r must be positive");
  Require(sigma_p > 0.0, "sigma_p must be positive");
  Require(epsilon >= 0.0, "epsilon must be non-negative");
  Require(alpha_l > 0.0, "alpha_l must be positive");
  Require(alpha_l < alpha_u, "alpha_l must be below alpha_u");
  Require(ridge_lambda > 0.0, "ridge_lambda must be positive");
  Require(ball_radius > 0.0, "ball_radius must be positive");
  Require(query_mode == QueryMode::kClosedForm || mc_samples >= 1,
          "mc_samples must be >= 1");
  Require(initial_action >= 0, "initial_action must be non-negative");
  if (mode == HyperparamMode::kTheory) {
    Require(ridge_lambda == 1.0, "theory mode requires ridge_lambda = 1");
    Require(alpha_l == alpha_u / 2.0, "theory mode requires alpha_l = alpha_u / 2");
  }
}

PrLsviState make_pr_lsvi_state(const LinearMdp& env, const PrLsviConfig& config, Rng rng) {
  config.validate();
  if (config.initial_action >= env.n_actions()) {
    throw ConfigError("initial_action is not a valid action of the environment");
  }
  PrLsviState state;
  state.trajectory_cov = PsdMatrix::scaled_identity(env.dim(), config.ridge_lambda);
  state.step_cov.assign(env.horizon(), state.trajectory_cov);
  state.preferences = PreferenceDataset(env.dim());
  state.transitions.resize(std::max(0, env.horizon() - 1));
  state.previous_greedy = Policy(env.horizon(), env.n_states(), config.initial_action);
  state.theta_hat.assign(env.dim(), 0.0);
  state.rng = rng;
  return state;
}

double omega_blend(double norm, double linear, double alpha_l, double alpha_u,
                   double cap) {
  if (norm <= alpha_l) return linear;
  if (norm > alpha_u) return cap;
  const double rho = (alpha_u - norm) / (alpha_u - alpha_l);
  return rho * linear + (1.0 - rho) * cap;
}

double omega(std::span<const double> phi, std::span<const double> theta_p,
             const PsdMatrix& step_cov, double alpha_l, double alpha_u, int h,
             int horizon) {
  return omega_blend(mahalanobis(phi, step_cov, NormMode::kInverse),
                     kernels::dot(phi, theta_p), alpha_l, alpha_u,
                     static_cast<double>(horizon - h - 1));
}

double RandomizedValueFn::v_value(int h, int s) const {
  double best = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < n_actions; ++a) best = std::max(best, q_value(h, s, a));
  return best;
}

RandomizedValueFn lsvi_backward(const PrLsviState& state, std::span<const double> theta_r,
                                const PrLsviConfig& config, const LinearMdp& env,
                                Rng& rng) {
  const int horizon = env.horizon();
  const int dim = env.dim();
  RandomizedValueFn vf;
  vf.theta_r.assign(theta_r.begin(), theta_r.end());
  vf.alpha_l = config.alpha_l;
  vf.alpha_u = config.alpha_u;
  vf.horizon = horizon;
  vf.n_actions = env.n_actions();
  vf.theta_p_hat.assign(horizon, Vector(dim, 0.0));
  vf.theta_p.assign(horizon, Vector(dim, 0.0));
  vf.q.resize(horizon);
  vf.feature_norm.resize(horizon);

  Vector reward_estimate(env.induced().n_pairs());
  kernels::matvec(env.features(), theta_r, reward_estimate);

  auto fill = [&](int h) {
    FillStep(env, reward_estimate, vf.theta_p[h], state.step_cov[h], config.alpha_l,
             config.alpha_u, static_cast<double>(horizon - h - 1), vf.q[h],
             vf.feature_norm[h]);
  };

  fill(horizon - 1);
  Vector next_value(env.n_states());
  for (int h = horizon - 2; h >= 0; --h) {
    for (int s = 0; s < env.n_states(); ++s) next_value[s] = vf.v_value(h + 1, s);
    Vector target(dim, 0.0);
    for (const TransitionSample& sample : state.transitions[h]) {
      kernels::axpy(next_value[sample.next_state], sample.feature, target);
    }
    vf.theta_p_hat[h] = ridge_solve(state.step_cov[h], target);
    vf.theta_p[h] = sample_correlated_gaussian(vf.theta_p_hat[h],
                                               config.sigma_p * config.sigma_p,
                                               state.step_cov[h], rng);
    fill(h);
  }
  return vf;
}

Policy greedy_policy(const RandomizedValueFn& vf, const LinearMdp& env) {
  Policy policy(env.horizon(), env.n_states(), 0);
  for (int h = 0; h < env.horizon(); ++h) {
    for (int s = 0; s < env.n_states(); ++s) {
      int best_action = 0;
      double best = vf.q_value(h, s, 0);
      for (int a = 1; a < env.n_actions(); ++a) {
        const double q = vf.q_value(h, s, a);
        if (q > best) {
          best = q;
          best_action = a;
        }
      }
      policy.set_action(h, s, best_action);
    }
  }
  return policy;
}

double query_uncertainty_closed(std::span<const double> delta_phi, const PsdMatrix& cov,
                                double sigma_r) {
  return 2.0 * sigma_r / std::sqrt(std::numbers::pi) *
         mahalanobis(delta_phi, cov, NormMode::kInverse);
}

double query_uncertainty_mc(std::span<const double> theta_hat, double sigma_r,
                            const PsdMatrix& cov, std::span<const double> delta_phi,
                            int samples, Rng& rng) {
  if (samples < 1) throw std::invalid_argument("query_uncertainty_mc needs samples >= 1");
  if (theta_hat.size() != delta_phi.size()) {
    throw std::invalid_argument("query_uncertainty_mc: dimension mismatch");
  }
  // theta_i = theta_hat + sigma_r L^{-T} u_i, so
  // dphi^T (theta_0 - theta_1) = sigma_r w^T (u_0 - u_1) with w = L^{-1} dphi.
  const Vector w = cov.solve_lower(delta_phi);
  Vector u(w.size());
  double total = 0.0;
  for (int i = 0; i < samples; ++i) {
    for (double& v : u) v = rng.normal();
    const double first = kernels::dot(w, u);
    for (double& v : u) v = rng.normal();
    const double second = kernels::dot(w, u);
    total += std::abs(first - second);
  }
  return sigma_r * total / samples;
}

EpisodeRecord pr_lsvi_episode(PrLsviState& state, const LinearMdp& env,
                              const PreferenceOracle& oracle, const PrLsviConfig& config) {
  Rng rng = state.rng;
  const int horizon = env.horizon();

  MleConfig mle_config;
  mle_config.ball_radius = config.ball_radius;
  mle_config.max_iterations = config.mle_max_iterations;
  mle_config.gradient_tolerance = config.mle_tolerance;
  const MleResult mle = mle_fit(state.preferences, oracle.link, mle_config);

  const Vector theta_r = sample_correlated_gaussian(
      mle.theta, config.sigma_r * config.sigma_r, state.trajectory_cov, rng);
  const RandomizedValueFn vf = lsvi_backward(state, theta_r, config, env, rng);

  EpisodeRecord record;
  record.t = state.episodes + 1;
  record.policy0 = greedy_policy(vf, env);
  record.policy1 = state.previous_greedy;
  record.tau0 = rollout(env, record.policy0, rng);
  record.tau1 = rollout(env, record.policy1, rng);

  Vector delta_phi = trajectory_feature(env, record.tau1);
  kernels::axpy(-1.0, trajectory_feature(env, record.tau0), delta_phi);
  record.query_norm = mahalanobis(delta_phi, state.trajectory_cov, NormMode::kInverse);
  record.uncertainty =
      config.query_mode == QueryMode::kClosedForm
          ? query_uncertainty_closed(delta_phi, state.trajectory_cov, config.sigma_r)
          : query_uncertainty_mc(mle.theta, config.sigma_r, state.trajectory_cov,
                                 delta_phi, config.mc_samples, rng);
  record.z = record.uncertainty > config.epsilon ? 1 : 0;

  PsdMatrix trajectory_cov = state.trajectory_cov;
  int o = 0;
  if (record.z == 1) {
    o = oracle.sample(record.tau0, record.tau1, rng);
    record.queried_o = o;
    trajectory_cov.rank_one_update_in_place(delta_phi);
  }
  std::vector<PsdMatrix> step_cov = state.step_cov;
  for (int h = 0; h < horizon; ++h) {
    const StateAction& sa = record.tau0.steps[h];
    step_cov[h].rank_one_update_in_place(env.feature(sa.state, sa.action));
  }

  // Commit. Nothing below can fail short of allocation.
  state.trajectory_cov = std::move(trajectory_cov);
  state.step_cov = std::move(step_cov);
  for (int h = 0; h + 1 < horizon; ++h) {
    const StateAction& sa = record.tau0.steps[h];
    const std::span<const double> phi = env.feature(sa.state, sa.action);
    state.transitions[h].push_back(
        {Vector(phi.begin(), phi.end()), record.tau0.steps[h + 1].state});
  }
  if (record.z == 1) {
    state.query_potential += std::min(1.0, record.query_norm * record.query_norm);
  }
  state.preferences.add({std::move(delta_phi), o, record.z});
  state.previous_greedy = record.policy0;
  state.theta_hat = mle.theta;
  state.mle_clamp_warnings += mle.clamp_warnings;
  state.rng = rng;
  ++state.episodes;
  return record;
}

TheoryHyperparams theory_hyperparams(int dim, int horizon, int episodes, double ball_radius,
                                     double kappa, double kappa_bar, double delta) {
  if (dim < 1 || horizon < 1 || episodes < 1 || !(ball_radius > 0.0) || !(kappa > 0.0) ||
      !(kappa_bar > 0.0) || !(delta > 0.0 && delta < 1.0)) {
    throw std::invalid_argument("theory_hyperparams: arguments must be positive, delta in (0,1)");
  }
  const double d = dim;
  const double h = horizon;
  const double t = episodes;
  const double b = ball_radius;
  const double lambda = 1.0;

  TheoryHyperparams out;
  out.eps_eta_r = std::sqrt(80.0 * kappa * d * std::log(24.0 * b * t * t / (kappa_bar * delta)) +
                            168.0 * b * b * d * std::log(6.0 * b * t * t / delta) +
                            4.0 * lambda * b * b);
  const double sigma_r = out.eps_eta_r;
  out.eps_xi_r = sigma_r * std::sqrt(2.0 * d * std::log(2.0 * d * t / delta));
  out.v_max = h * (2.0 + (out.eps_xi_r + out.eps_eta_r) / std::sqrt(lambda));
  out.eps_lambda = out.v_max * std::sqrt(lambda * d);
  const double xi_p_factor = std::sqrt(2.0 * d * std::log(2.0 * d * h * t / delta));

  // sigma_P depends on eps_eta_P, and eps_xi_P and iota depend on sigma_P,
  // so all of them move with chi.
  double chi = 1.0;
  double eps_eta_p = 0.0;
  out.chi_trajectory.push_back(chi);
  bool settled = false;
  for (int iter = 1; iter <= 100; ++iter) {
    double eps_xi_p = (eps_eta_p + out.eps_lambda) * std::sqrt(h) * xi_p_factor;
    const double iota =
        std::log(12.0 * h * t * t * (t + lambda) * out.v_max *
                 (b + (2.0 * out.v_max * std::sqrt(d * t) + eps_xi_p + out.eps_xi_r) /
                          std::sqrt(lambda)));
    eps_eta_p = chi * (6.0 / std::sqrt(lambda) +
                       16.0 * d * out.v_max * std::sqrt(iota - std::log(delta * lambda)));
    eps_xi_p = (eps_eta_p + out.eps_lambda) * std::sqrt(h) * xi_p_factor;
    const double next_chi = std::max(1.0, std::log(eps_xi_p + eps_eta_p + out.eps_lambda));
    out.chi_trajectory.push_back(next_chi);
    out.iterations = iter;
    out.iota = iota;
    out.eps_xi_p = eps_xi_p;
    out.eps_eta_p = eps_eta_p;
    const bool done = std::abs(next_chi - chi) < 1e-6;
    chi = next_chi;
    if (done) {
      settled = true;
      break;
    }
  }
  if (!settled) {
    std::ostringstream msg;
    msg << "chi fixed point did not converge; trajectory:";
    for (double c : out.chi_trajectory) msg << ' ' << c;
    throw ConfigError(msg.str());
  }
  // Final consistency with the settled chi.
  out.chi = chi;
  out.eps_eta_p = chi * out.eps_eta_p / out.chi_trajectory[out.chi_trajectory.size() - 2];
  out.eps_xi_p = (out.eps_eta_p + out.eps_lambda) * std::sqrt(h) * xi_p_factor;

  PrLsviConfig& c = out.config;
  c.mode = HyperparamMode::kTheory;
  c.ridge_lambda = lambda;
  c.sigma_r = sigma_r;
  c.sigma_p = (out.eps_eta_p + out.eps_lambda) * std::sqrt(h);
  c.alpha_u = 1.0 / (out.eps_xi_p + out.eps_eta_p + out.eps_lambda);
  c.alpha_l = c.alpha_u / 2.0;
  c.ball_radius = b;
  c.epsilon = 1.0 / std::sqrt(t);
  return out;
}

}  // namespace prefrl
