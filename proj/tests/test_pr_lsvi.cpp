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

#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "prefrl/errors.hpp"
#include "prefrl/pr_lsvi.hpp"

using namespace prefrl;

namespace {

struct Instance {
  TabularMdp tabular;
  LinearMdp env;
  PreferenceOracle oracle;
};

Instance MakeInstance(int n_states, int n_actions, int horizon, std::uint64_t seed) {
  Instance out;
  out.tabular = oracle::random_mdp(n_states, n_actions, horizon, seed);
  out.env = tabular_to_linear(out.tabular);
  out.oracle = {LinkFunction::btl(), out.env.induced()};
  return out;
}

PrLsviConfig Practical(double epsilon, double ball_radius) {
  PrLsviConfig c;
  c.epsilon = epsilon;
  c.ball_radius = ball_radius;
  return c;
}

std::vector<EpisodeRecord> Play(PrLsviState& state, const Instance& inst,
                                const PrLsviConfig& config, int episodes) {
  std::vector<EpisodeRecord> out;
  for (int t = 0; t < episodes; ++t) {
    out.push_back(pr_lsvi_episode(state, inst.env, inst.oracle, config));
  }
  return out;
}

Vector DeltaPhi(const LinearMdp& env, const EpisodeRecord& r) {
  Vector d = trajectory_feature(env, r.tau1);
  const Vector f0 = trajectory_feature(env, r.tau0);
  for (std::size_t k = 0; k < d.size(); ++k) d[k] -= f0[k];
  return d;
}

}  // namespace

TEST_CASE("closed-form query uncertainty") {
  const PsdMatrix i3 = PsdMatrix::scaled_identity(3, 1.0);
  CHECK(query_uncertainty_closed(Vector{1.0, 0.0, 0.0}, i3, 1.0) ==
        doctest::Approx(2.0 / std::sqrt(std::numbers::pi)).epsilon(1e-15));
  CHECK(query_uncertainty_closed(Vector{1.0, 0.0, 0.0}, i3, 1.0) ==
        doctest::Approx(1.12838).epsilon(1e-5));
  CHECK(query_uncertainty_closed(Vector(3, 0.0), i3, 1.0) == 0.0);
}

TEST_CASE("Monte-Carlo query uncertainty") {
  Rng rng(3);
  const PsdMatrix i1 = PsdMatrix::scaled_identity(1, 1.0);
  const double mc = query_uncertainty_mc(Vector{0.0}, 1.0, i1, Vector{1.0}, 200000, rng);
  CHECK(std::abs(mc - 2.0 / std::sqrt(std::numbers::pi)) <= 0.02 * 2.0 /
                                                               std::sqrt(std::numbers::pi));

  std::mt19937_64 gen(4);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int trial = 0; trial < 4; ++trial) {
    const int d = 2 + trial;
    PsdMatrix cov = PsdMatrix::scaled_identity(d, 0.5);
    for (int i = 0; i < d; ++i) {
      Vector x(d);
      for (double& v : x) v = normal(gen);
      cov.rank_one_update_in_place(x);
    }
    Vector dphi(d);
    for (double& v : dphi) v = normal(gen);
    const double sigma = 0.3 + trial;
    const double closed = query_uncertainty_closed(dphi, cov, sigma);
    // The center cancels: the same stream gives the same estimate.
    Rng a(50 + trial), b(50 + trial);
    const double m1 = query_uncertainty_mc(Vector(d, 0.0), sigma, cov, dphi, 200000, a);
    const double m2 = query_uncertainty_mc(Vector(d, 7.0), sigma, cov, dphi, 200000, b);
    CHECK(m1 == m2);
    CHECK(std::abs(m1 - closed) <= 0.02 * closed);
  }
  CHECK_THROWS_AS(query_uncertainty_mc(Vector{0.0}, 1.0, i1, Vector{1.0}, 0, rng),
                  std::invalid_argument);
}

TEST_CASE("omega cases") {
  const double al = 0.2, au = 0.6, cap = 3.0, linear = 1.3;
  CHECK(omega_blend(0.1, linear, al, au, cap) == linear);
  CHECK(omega_blend(al, linear, al, au, cap) == linear);
  CHECK(omega_blend(0.7, linear, al, au, cap) == cap);
  CHECK(omega_blend(0.4, linear, al, au, cap) == doctest::Approx((linear + cap) / 2.0));
  CHECK(std::abs(omega_blend(al + 1e-12, linear, al, au, cap) - linear) <= 1e-9);

  // d = 2 by hand: Sigma = diag(4, 1), phi = (0.8, 0.3), so the norm is
  // sqrt(0.16 + 0.09) = 0.5; rho = (0.6 - 0.5) / 0.4 = 0.25.
  const PsdMatrix cov = PsdMatrix::from_dense(2, {4.0, 0.0, 0.0, 1.0});
  const Vector phi = {0.8, 0.3}, theta = {1.0, 2.0};
  const double lin = 0.8 + 0.6;
  // Horizon 5, step index 1: four steps remain.
  CHECK(omega(phi, theta, cov, al, au, 1, 5) == doctest::Approx(0.25 * lin + 0.75 * 3.0));

  // Tiny ridge and a large feature: always the truncated branch.
  const PsdMatrix tiny = PsdMatrix::scaled_identity(2, 1e-6);
  for (int h = 0; h < 4; ++h) {
    CHECK(omega(Vector{1.0, 1.0}, theta, tiny, al, au, h, 4) == static_cast<double>(4 - h - 1));
  }
}

TEST_CASE("omega is continuous across both knees") {
  std::mt19937_64 gen(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  // Blend slopes |cap - linear| / (alpha_u - alpha_l) stay below 4, so a
  // +-1e-7 probe moves the value by at most 8e-7.
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const double al = 0.05 + 0.45 * u(gen);
    const double au = al + 1.0 + u(gen);
    const double cap = std::floor(4.0 * u(gen));
    const double linear = 2.0 * u(gen) - 1.0;
    for (double knee : {al, au}) {
      worst = std::max(worst, std::abs(omega_blend(knee + 1e-7, linear, al, au, cap) -
                                       omega_blend(knee - 1e-7, linear, al, au, cap)));
    }
  }
  CHECK(worst <= 1e-6);

  // Any parameterization: the probe never moves the value by more than the
  // blend slope allows, so there is no jump.
  double excess = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const double au = 0.01 + u(gen);
    const double al = au * (0.01 + 0.98 * u(gen));
    const double cap = std::floor(10.0 * u(gen));
    const double linear = 20.0 * (u(gen) - 0.5);
    const double slope = std::abs(cap - linear) / (au - al);
    for (double knee : {al, au}) {
      const double jump = std::abs(omega_blend(knee + 1e-7, linear, al, au, cap) -
                                   omega_blend(knee - 1e-7, linear, al, au, cap));
      excess = std::max(excess, jump - 2e-7 * slope * (1.0 + 1e-6) - 1e-12);
    }
  }
  CHECK(excess <= 0.0);
}

TEST_CASE("first episode regression is empty") {
  const Instance inst = MakeInstance(3, 2, 4, 1);
  PrLsviConfig config = Practical(0.0, inst.env.reward_bound());
  config.sigma_p = 0.7;
  config.ridge_lambda = 2.0;
  const PrLsviState state = make_pr_lsvi_state(inst.env, config, Rng(1));
  Rng rng(2);
  const int d = inst.env.dim();
  double sum_sq = 0.0;
  int count = 0;
  for (int i = 0; i < 4000; ++i) {
    const RandomizedValueFn vf = lsvi_backward(state, Vector(d, 0.0), config, inst.env, rng);
    for (int h = 0; h < 4; ++h) {
      for (double v : vf.theta_p_hat[h]) CHECK(v == 0.0);
    }
    for (double v : vf.theta_p[3]) CHECK(v == 0.0);
    for (int h = 0; h < 3; ++h) {
      for (double v : vf.theta_p[h]) {
        sum_sq += v * v;
        ++count;
      }
    }
  }
  CHECK(sum_sq / count == doctest::Approx(0.49 / 2.0).epsilon(0.03));
}

TEST_CASE("value regression matches an offline ridge fit") {
  TabularMdp mdp;
  mdp.n_states = 1;
  mdp.n_actions = 2;
  mdp.horizon = 3;
  mdp.transition = {1.0, 1.0};
  mdp.reward = {0.2, 0.7};
  Instance inst{mdp, tabular_to_linear(mdp), {LinkFunction::btl(), mdp}};
  inst.oracle.mdp = inst.env.induced();
  PrLsviConfig config = Practical(0.0, inst.env.reward_bound());
  config.sigma_r = 1e-10;
  config.sigma_p = 1e-10;
  PrLsviState state = make_pr_lsvi_state(inst.env, config, Rng(4));
  Play(state, inst, config, 60);

  Rng rng(5);
  const int d = inst.env.dim();
  const RandomizedValueFn vf = lsvi_backward(state, state.theta_hat, config, inst.env, rng);
  for (int h = 0; h + 1 < 3; ++h) {
    oracle::Matrix a = oracle::identity(d, config.ridge_lambda);
    Vector b(d, 0.0);
    for (const TransitionSample& s : state.transitions[h]) {
      for (int i = 0; i < d; ++i) {
        b[i] += s.feature[i] * vf.v_value(h + 1, s.next_state);
        for (int j = 0; j < d; ++j) a[i][j] += s.feature[i] * s.feature[j];
      }
    }
    const Vector expected = oracle::multiply(oracle::inverse(a), b);
    for (int i = 0; i < d; ++i) {
      CHECK(std::abs(vf.theta_p_hat[h][i] - expected[i]) <= 1e-10 * std::max(1.0, std::abs(expected[i])));
      CHECK(std::abs(vf.theta_p[h][i] - vf.theta_p_hat[h][i]) <= 1e-6);
    }
  }
}

TEST_CASE("greedy policy takes the argmax with low-index ties") {
  const Instance inst = MakeInstance(2, 3, 2, 2);
  RandomizedValueFn vf;
  vf.horizon = 2;
  vf.n_actions = 3;
  vf.q = {{0.5, 0.5, 0.1, 0.0, 0.2, 0.9}, {1.0, 2.0, 2.0, -1.0, -1.0, -1.0}};
  const Policy p = greedy_policy(vf, inst.env);
  CHECK(p.action(0, 0) == 0);
  CHECK(p.action(0, 1) == 2);
  CHECK(p.action(1, 0) == 1);
  CHECK(p.action(1, 1) == 0);
  CHECK(vf.v_value(1, 0) == 2.0);

  // Against brute force on a perturbed value function.
  PrLsviConfig config = Practical(0.0, inst.env.reward_bound());
  const PrLsviState state = make_pr_lsvi_state(inst.env, config, Rng(6));
  Rng rng(7);
  Vector theta(inst.env.dim());
  for (double& v : theta) v = rng.normal();
  const RandomizedValueFn random_vf = lsvi_backward(state, theta, config, inst.env, rng);
  const Policy g = greedy_policy(random_vf, inst.env);
  for (int h = 0; h < 2; ++h) {
    for (int s = 0; s < 2; ++s) {
      for (int a = 0; a < 3; ++a) {
        CHECK(random_vf.q_value(h, s, g.action(h, s)) >= random_vf.q_value(h, s, a));
      }
    }
  }
}

TEST_CASE("Q above the upper knee is reward plus remaining steps") {
  const Instance inst = MakeInstance(3, 2, 4, 3);
  PrLsviConfig config = Practical(0.0, inst.env.reward_bound());
  config.alpha_l = 0.01;
  config.alpha_u = 0.02;
  const PrLsviState state = make_pr_lsvi_state(inst.env, config, Rng(1));
  Rng rng(2);
  Vector theta(inst.env.dim());
  for (double& v : theta) v = rng.normal();
  const RandomizedValueFn vf = lsvi_backward(state, theta, config, inst.env, rng);
  for (int h = 0; h < 4; ++h) {
    for (int s = 0; s < 3; ++s) {
      for (int a = 0; a < 2; ++a) {
        double r = 0.0;
        const auto phi = inst.env.feature(s, a);
        for (int k = 0; k < inst.env.dim(); ++k) r += phi[k] * theta[k];
        CHECK(vf.feature_norm[h][s * 2 + a] > config.alpha_u);
        CHECK(std::abs(vf.q_value(h, s, a) - (r + (4 - h - 1))) <= 1e-12);
      }
    }
  }
}

TEST_CASE("infinite threshold never queries") {
  const Instance inst = MakeInstance(3, 2, 3, 4);
  const PrLsviConfig config = Practical(INFINITY, inst.env.reward_bound());
  PrLsviState state = make_pr_lsvi_state(inst.env, config, Rng(8));
  const std::vector<EpisodeRecord> records = Play(state, inst, config, 30);
  for (const EpisodeRecord& r : records) {
    CHECK(r.z == 0);
    CHECK_FALSE(r.queried_o.has_value());
  }
  CHECK(state.trajectory_cov == PsdMatrix::scaled_identity(inst.env.dim(), 1.0));
  CHECK(state.preferences.queried() == 0);
  CHECK(state.preferences.size() == 30);
  CHECK(state.theta_hat == Vector(inst.env.dim(), 0.0));
  CHECK(state.query_potential == 0.0);
}

TEST_CASE("zero threshold queries whenever the features differ") {
  const Instance inst = MakeInstance(3, 2, 3, 5);
  const PrLsviConfig config = Practical(0.0, inst.env.reward_bound());
  PrLsviState state = make_pr_lsvi_state(inst.env, config, Rng(9));
  const std::vector<EpisodeRecord> records = Play(state, inst, config, 40);
  int differing = 0;
  for (const EpisodeRecord& r : records) {
    bool nonzero = false;
    for (double v : DeltaPhi(inst.env, r)) nonzero = nonzero || v != 0.0;
    differing += nonzero;
    CHECK(r.z == (nonzero ? 1 : 0));
  }
  CHECK(differing > 0);
}

TEST_CASE("episode bookkeeping") {
  const Instance inst = MakeInstance(4, 2, 3, 6);
  PrLsviConfig config = Practical(0.3, inst.env.reward_bound());
  config.initial_action = 1;
  config.ridge_lambda = 0.5;
  PrLsviState state = make_pr_lsvi_state(inst.env, config, Rng(10));
  const std::vector<EpisodeRecord> records = Play(state, inst, config, 80);
  const int d = inst.env.dim();

  CHECK(records[0].policy1 == Policy(3, 4, 1));
  for (std::size_t t = 1; t < records.size(); ++t) {
    CHECK(records[t].policy1 == records[t - 1].policy0);
    CHECK(records[t].t == static_cast<int>(t) + 1);
  }

  // Covariances equal the accumulated outer products.
  oracle::Matrix traj = oracle::identity(d, 0.5);
  std::vector<oracle::Matrix> steps(3, oracle::identity(d, 0.5));
  double potential = 0.0;
  for (const EpisodeRecord& r : records) {
    const Vector x = DeltaPhi(inst.env, r);
    if (r.z == 1) {
      const double q = oracle::quadratic(oracle::inverse(traj), x);
      CHECK(std::abs(std::sqrt(q) - r.query_norm) <= 1e-9 * std::max(1.0, std::sqrt(q)));
      potential += std::min(1.0, q);
      for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) traj[i][j] += x[i] * x[j];
      }
    }
    for (int h = 0; h < 3; ++h) {
      const auto phi = inst.env.feature(r.tau0.steps[h].state, r.tau0.steps[h].action);
      for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) steps[h][i][j] += phi[i] * phi[j];
      }
    }
  }
  CHECK(oracle::max_abs_diff(oracle::from_flat(d, state.trajectory_cov.dense()), traj) <= 1e-8);
  for (int h = 0; h < 3; ++h) {
    CHECK(oracle::max_abs_diff(oracle::from_flat(d, state.step_cov[h].dense()), steps[h]) <=
          1e-8);
  }
  CHECK(state.query_potential == doctest::Approx(potential).epsilon(1e-9));
  CHECK(potential <= 2.0 * d * std::log((0.5 + 4.0 * 80) / 0.5));

  // Transition data comes from the pi^0 rollouts only.
  for (int h = 0; h < 2; ++h) {
    REQUIRE(state.transitions[h].size() == records.size());
    for (std::size_t t = 0; t < records.size(); ++t) {
      CHECK(state.transitions[h][t].next_state == records[t].tau0.steps[h + 1].state);
    }
  }

  // No-query geometry.
  const double radius = config.epsilon * std::sqrt(std::numbers::pi) / (2.0 * config.sigma_r);
  for (const EpisodeRecord& r : records) {
    if (r.z == 0) CHECK(r.query_norm <= radius * (1.0 + 1e-12));
    if (r.z == 1) CHECK(r.query_norm > radius * (1.0 - 1e-12));
  }
}

TEST_CASE("episodes replay identically") {
  const Instance inst = MakeInstance(2, 2, 3, 7);
  const PrLsviConfig config = Practical(0.2, inst.env.reward_bound());
  PrLsviState a = make_pr_lsvi_state(inst.env, config, Rng(11));
  PrLsviState b = make_pr_lsvi_state(inst.env, config, Rng(11));
  const auto ra = Play(a, inst, config, 10);
  const auto rb = Play(b, inst, config, 10);
  for (int t = 0; t < 10; ++t) {
    CHECK(ra[t].z == rb[t].z);
    CHECK(ra[t].policy0 == rb[t].policy0);
    CHECK(ra[t].tau0 == rb[t].tau0);
    CHECK(ra[t].tau1 == rb[t].tau1);
    CHECK(ra[t].uncertainty == rb[t].uncertainty);
  }
  CHECK(a.rng == b.rng);
}

TEST_CASE("Monte-Carlo query mode") {
  const Instance inst = MakeInstance(3, 2, 3, 8);
  PrLsviConfig config = Practical(0.2, inst.env.reward_bound());
  config.query_mode = QueryMode::kMonteCarlo;
  config.mc_samples = 2000;
  PrLsviState state = make_pr_lsvi_state(inst.env, config, Rng(12));
  for (const EpisodeRecord& r : Play(state, inst, config, 20)) {
    CHECK(r.z == (r.uncertainty > config.epsilon ? 1 : 0));
    const double closed = 2.0 * config.sigma_r / std::sqrt(std::numbers::pi) * r.query_norm;
    CHECK(std::abs(r.uncertainty - closed) <= 0.15 * closed + 1e-12);
  }
}

TEST_CASE("a failing episode leaves the state untouched") {
  // Unscaled affine preferences on H = 3 overflow the link domain.
  TabularMdp mdp;
  mdp.n_states = 1;
  mdp.n_actions = 2;
  mdp.horizon = 3;
  mdp.transition = {1.0, 1.0};
  mdp.reward = {0.0, 1.0};
  const LinearMdp env = tabular_to_linear(mdp);
  const PreferenceOracle affine{LinkFunction::affine(), env.induced()};
  const PrLsviConfig config = Practical(0.0, env.reward_bound());
  PrLsviState state = make_pr_lsvi_state(env, config, Rng(13));
  bool threw = false;
  for (int t = 0; t < 50 && !threw; ++t) {
    const PrLsviState before = state;
    try {
      pr_lsvi_episode(state, env, affine, config);
    } catch (const std::invalid_argument&) {
      threw = true;
      CHECK(state.episodes == before.episodes);
      CHECK(state.rng == before.rng);
      CHECK(state.trajectory_cov == before.trajectory_cov);
      CHECK(state.step_cov == before.step_cov);
      CHECK(state.preferences.size() == before.preferences.size());
      CHECK(state.transitions[0].size() == before.transitions[0].size());
      CHECK(state.previous_greedy == before.previous_greedy);
    }
  }
  CHECK(threw);
}

TEST_CASE("configuration validation") {
  PrLsviConfig c;
  CHECK_NOTHROW(c.validate());
  c.alpha_l = 0.7;
  try {
    c.validate();
    FAIL("expected a configuration error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("alpha_l") != std::string::npos);
  }
  PrLsviConfig neg;
  neg.sigma_r = 0.0;
  CHECK_THROWS_AS(neg.validate(), ConfigError);
  PrLsviConfig theory;
  theory.mode = HyperparamMode::kTheory;
  theory.alpha_l = 0.2;
  theory.alpha_u = 0.4;
  CHECK_NOTHROW(theory.validate());
  theory.ridge_lambda = 2.0;
  CHECK_THROWS_AS(theory.validate(), ConfigError);
  const Instance inst = MakeInstance(2, 2, 2, 9);
  PrLsviConfig bad_action;
  bad_action.initial_action = 5;
  CHECK_THROWS_AS(make_pr_lsvi_state(inst.env, bad_action, Rng(0)), ConfigError);
}

TEST_CASE("theory hyperparameters") {
  const LinkConstants k = link_constants(LinkFunction::btl(), 2);
  const TheoryHyperparams th = theory_hyperparams(2, 2, 100, 2.0, k.kappa, k.kappa_bar, 0.05);
  CHECK(th.iterations < 100);
  CHECK(th.config.alpha_u > 0.0);
  CHECK(th.config.ridge_lambda == 1.0);
  CHECK(th.config.alpha_l == th.config.alpha_u / 2.0);
  CHECK(th.config.sigma_r == th.eps_eta_r);
  CHECK_NOTHROW(th.config.validate());

  const double d = 2, h = 2, t = 100, b = 2, delta = 0.05;
  const double eta_r = std::sqrt(80.0 * k.kappa * d * std::log(24.0 * b * t * t / (k.kappa_bar * delta)) +
                                 168.0 * b * b * d * std::log(6.0 * b * t * t / delta) + 4.0 * b * b);
  CHECK(th.eps_eta_r == doctest::Approx(eta_r).epsilon(1e-14));
  CHECK(th.eps_xi_r == doctest::Approx(eta_r * std::sqrt(2.0 * d * std::log(2.0 * d * t / delta))));
  const double v_max = h * (2.0 + th.eps_xi_r + th.eps_eta_r);
  CHECK(th.v_max == doctest::Approx(v_max).epsilon(1e-14));
  CHECK(th.eps_lambda == doctest::Approx(v_max * std::sqrt(d)).epsilon(1e-14));
  const double total = th.eps_xi_p + th.eps_eta_p + th.eps_lambda;
  CHECK(std::abs(th.chi - std::max(1.0, std::log(total))) <= 1e-5);
  CHECK(th.config.sigma_p == doctest::Approx((th.eps_eta_p + th.eps_lambda) * std::sqrt(h)));
  CHECK(th.config.alpha_u == doctest::Approx(1.0 / total));
  CHECK(th.eps_xi_p == doctest::Approx(th.config.sigma_p *
                                       std::sqrt(2.0 * d * std::log(2.0 * d * h * t / delta))));
  CHECK(th.eps_eta_p ==
        doctest::Approx(th.chi * (6.0 + 16.0 * d * v_max * std::sqrt(th.iota - std::log(delta))))
            .epsilon(1e-4));
  CHECK(th.chi_trajectory.front() == 1.0);
  CHECK(th.config.epsilon == doctest::Approx(0.1));

  CHECK_THROWS_AS(theory_hyperparams(0, 2, 100, 2.0, k.kappa, k.kappa_bar), std::invalid_argument);
  CHECK_THROWS_AS(theory_hyperparams(2, 2, 100, 2.0, k.kappa, k.kappa_bar, 1.5),
                  std::invalid_argument);
}
