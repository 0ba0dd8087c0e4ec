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

#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "prefrl/errors.hpp"
#include "prefrl/pbts.hpp"

using namespace prefrl;

namespace {

Trajectory Path(std::initializer_list<StateAction> steps) { return Trajectory{steps}; }

std::vector<Vector> RandomParticles(int count, std::size_t pairs, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Vector> out(count, Vector(pairs));
  for (Vector& p : out) {
    for (double& v : p) v = u(gen);
  }
  return out;
}

// Reward sum written out step by step.
double PathReward(const Vector& r, int n_actions, const Trajectory& tau) {
  double total = 0.0;
  for (const StateAction& sa : tau.steps) total += r[sa.state * n_actions + sa.action];
  return total;
}

double DoubleSum(const RewardParticlePosterior& post, const Trajectory& tau0,
                 const Trajectory& tau1) {
  const Vector w = post.weights();
  double total = 0.0;
  for (std::size_t j = 0; j < post.size(); ++j) {
    for (std::size_t k = 0; k < post.size(); ++k) {
      const Vector& rj = post.particles()[j];
      const Vector& rk = post.particles()[k];
      const double dj = PathReward(rj, post.n_actions(), tau0) - PathReward(rj, post.n_actions(), tau1);
      const double dk = PathReward(rk, post.n_actions(), tau0) - PathReward(rk, post.n_actions(), tau1);
      total += w[j] * w[k] * std::abs(dj - dk);
    }
  }
  return total;
}

}  // namespace

TEST_CASE("transition counts follow the observed path") {
  DirichletTransitionPosterior post(3, 2, 0.5);
  const Trajectory tau = Path({{0, 1}, {2, 0}, {2, 0}, {1, 1}});
  post = update_transition_posterior(post, tau);
  long long total = 0;
  for (long long c : post.counts()) total += c;
  CHECK(total == 3);
  CHECK(post.concentration(0, 1, 2) == 1.5);
  CHECK(post.concentration(2, 0, 2) == 1.5);
  CHECK(post.concentration(2, 0, 1) == 1.5);
  CHECK(post.concentration(1, 1, 0) == 0.5);
  const Vector mean = post.posterior_mean(2, 0);
  CHECK(mean[0] == doctest::Approx(0.5 / 3.5));
  CHECK(mean[1] == doctest::Approx(1.5 / 3.5));
  CHECK_THROWS_AS(DirichletTransitionPosterior(2, 2, 0.0), std::invalid_argument);
}

TEST_CASE("particle log-weights are the direct product of likelihoods") {
  const LinkFunction btl = LinkFunction::btl();
  const std::vector<Vector> particles = RandomParticles(3, 4, 1);
  RewardParticlePosterior post(particles, 2);
  std::mt19937_64 gen(2);
  std::uniform_int_distribution<int> pick(0, 1);
  Vector expected(3, -std::log(3.0));
  for (int i = 0; i < 6; ++i) {
    const Trajectory tau0 = Path({{pick(gen), pick(gen)}, {pick(gen), pick(gen)}});
    const Trajectory tau1 = Path({{pick(gen), pick(gen)}, {pick(gen), pick(gen)}});
    const int o = pick(gen);
    post = update_reward_posterior(post, tau0, tau1, o, 1, btl);
    for (int j = 0; j < 3; ++j) {
      const double gap = PathReward(particles[j], 2, tau1) - PathReward(particles[j], 2, tau0);
      const double p1 = 1.0 / (1.0 + std::exp(-gap));
      expected[j] += std::log(o == 1 ? p1 : 1.0 - p1);
    }
  }
  for (int j = 0; j < 3; ++j) {
    CHECK(post.log_weights()[j] == doctest::Approx(expected[j]).epsilon(1e-12));
  }
  double norm = 0.0;
  for (double e : expected) norm += std::exp(e);
  const Vector w = post.weights();
  for (int j = 0; j < 3; ++j) CHECK(w[j] == doctest::Approx(std::exp(expected[j]) / norm));
}

TEST_CASE("unqueried rounds leave the reward posterior unchanged") {
  const RewardParticlePosterior post(RandomParticles(5, 4, 3), 2);
  const Trajectory tau0 = Path({{0, 0}, {1, 1}});
  const Trajectory tau1 = Path({{0, 1}, {1, 0}});
  CHECK(update_reward_posterior(post, tau0, tau1, 1, 0, LinkFunction::btl()) == post);
  CHECK(update_reward_posterior(post, tau0, tau1, 0, 0, LinkFunction::btl()) == post);
}

TEST_CASE("identical particles keep equal weights") {
  const Vector r = {0.1, 0.9, 0.4, 0.3};
  RewardParticlePosterior post({r, r, r, r}, 2);
  Rng rng(4);
  for (int i = 0; i < 20; ++i) {
    const Trajectory tau0 = Path({{static_cast<int>(rng.uniform_index(2)), 0}, {1, 1}});
    const Trajectory tau1 = Path({{0, static_cast<int>(rng.uniform_index(2))}, {1, 0}});
    post = update_reward_posterior(post, tau0, tau1, static_cast<int>(rng.uniform_index(2)), 1,
                                   LinkFunction::btl());
  }
  for (double w : post.weights()) CHECK(w == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("impossible observations are reported") {
  // Affine link: a gap of -1 has probability zero.
  const Vector r = {0.0, 1.0};
  RewardParticlePosterior post({r}, 2);
  const Trajectory better = Path({{0, 1}});
  const Trajectory worse = Path({{0, 0}});
  post = update_reward_posterior(post, better, worse, 1, 1, LinkFunction::affine());
  CHECK(std::isinf(post.log_weights()[0]));
  CHECK_THROWS_AS(post.weights(), ModelMisspecificationError);
  Rng rng(5);
  CHECK_THROWS_AS(sample_posterior_mdp(DirichletTransitionPosterior(1, 2), post, rng),
                  ModelMisspecificationError);

  // With a surviving particle the dead one gets exactly zero weight.
  RewardParticlePosterior two({r, {0.5, 0.5}}, 2);
  two = update_reward_posterior(two, better, worse, 1, 1, LinkFunction::affine());
  const Vector w = two.weights();
  CHECK(w[0] == 0.0);
  CHECK(w[1] == 1.0);
}

TEST_CASE("posterior draws") {
  SUBCASE("a huge concentration pins the row") {
    Rng rng(6);
    const Vector alpha = {1e9, 1.0};
    for (int i = 0; i < 100; ++i) {
      const Vector row = rng.dirichlet(alpha);
      CHECK(row[0] == doctest::Approx(1.0).epsilon(1e-6));
      CHECK(row[1] <= 1e-6);
    }
  }
  SUBCASE("rows are on the simplex and average to the posterior mean") {
    DirichletTransitionPosterior trans(3, 2, 0.7);
    const Trajectory tau = Path({{0, 0}, {1, 1}, {2, 0}, {0, 0}, {2, 1}});
    trans = update_transition_posterior(trans, tau);
    RewardParticlePosterior rewards(RandomParticles(1, 6, 7), 2);
    Rng rng(8);
    Vector mean(18, 0.0);
    const int n = 40000;
    for (int i = 0; i < n; ++i) {
      const PosteriorSample sample = sample_posterior_mdp(trans, rewards, rng);
      CHECK(sample.particle == 0);
      CHECK(sample.reward == rewards.particles()[0]);
      for (int p = 0; p < 6; ++p) {
        double total = 0.0;
        for (int k = 0; k < 3; ++k) {
          const double v = sample.transition[p * 3 + k];
          if (v < 0.0) FAIL("negative transition probability");
          total += v;
          mean[p * 3 + k] += v / n;
        }
        if (std::abs(total - 1.0) > 1e-12) FAIL("row does not sum to one");
      }
    }
    for (int s = 0; s < 3; ++s) {
      for (int a = 0; a < 2; ++a) {
        const Vector expect = trans.posterior_mean(s, a);
        for (int k = 0; k < 3; ++k) {
          CHECK(std::abs(mean[(s * 2 + a) * 3 + k] - expect[k]) <= 0.01);
        }
      }
    }
  }
  SUBCASE("particles are drawn by weight") {
    RewardParticlePosterior rewards(RandomParticles(2, 2, 9), 2);
    rewards.add_log_likelihood(0, std::log(3.0));
    Rng rng(10);
    int first = 0;
    const int n = 40000;
    for (int i = 0; i < n; ++i) {
      first += sample_posterior_mdp(DirichletTransitionPosterior(1, 2), rewards, rng).particle == 0;
    }
    CHECK(static_cast<double>(first) / n == doctest::Approx(0.75).epsilon(0.02));
  }
}

TEST_CASE("planner agrees with brute force") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const int horizon = 1 + static_cast<int>(seed % 3);
    const TabularMdp mdp = oracle::random_mdp(2, 2, horizon, 500 + seed);
    const OptimalSolution plan = plan_value_iteration(mdp.transition, mdp.reward, 2, 2, horizon);
    const oracle::BruteForce brute = oracle::enumerate_values(mdp, mdp.reward);
    CHECK(plan.value == doctest::Approx(brute.value).epsilon(1e-12));
    CHECK(oracle::forward_value(mdp, mdp.reward, plan.policy) ==
          doctest::Approx(brute.value).epsilon(1e-12));
  }
}

TEST_CASE("planner edge cases") {
  const TabularMdp mdp = oracle::random_mdp(3, 3, 1, 11);
  const OptimalSolution greedy = plan_value_iteration(mdp.transition, mdp.reward, 3, 3, 1);
  for (int s = 0; s < 3; ++s) {
    const int best = static_cast<int>(
        std::max_element(mdp.reward.begin() + s * 3, mdp.reward.begin() + s * 3 + 3) -
        (mdp.reward.begin() + s * 3));
    CHECK(greedy.policy.action(0, s) == best);
  }
  const TabularMdp deep = oracle::random_mdp(3, 3, 4, 12);
  const OptimalSolution zero =
      plan_value_iteration(deep.transition, Vector(9, 0.0), 3, 3, 4);
  CHECK(zero.value == 0.0);
  CHECK(zero.policy == Policy(4, 3, 0));
}

TEST_CASE("query uncertainty") {
  const Trajectory tau0 = Path({{0, 0}, {1, 0}});
  const Trajectory tau1 = Path({{0, 1}, {1, 1}});
  SUBCASE("single particle") {
    const RewardParticlePosterior one(RandomParticles(1, 4, 13), 2);
    CHECK(pbts_query_uncertainty(one, tau0, tau1) == 0.0);
  }
  SUBCASE("two particles") {
    // D = 0 for the first and 1 for the second: 2 * 0.25 * 1.
    const RewardParticlePosterior two({{0.5, 0.5, 0.5, 0.5}, {1.0, 0.0, 0.5, 0.5}}, 2);
    CHECK(pbts_query_uncertainty(two, tau0, tau1) == doctest::Approx(0.5).epsilon(1e-15));
  }
  SUBCASE("agrees with Monte-Carlo pairs") {
    RewardParticlePosterior post(RandomParticles(20, 4, 14), 2);
    for (int j = 0; j < 20; ++j) post.add_log_likelihood(j, 0.1 * j);
    const Vector w = post.weights();
    std::mt19937_64 gen(15);
    std::discrete_distribution<int> pick(w.begin(), w.end());
    double mc = 0.0;
    const int n = 1000000;
    for (int i = 0; i < n; ++i) {
      const Vector& a = post.particles()[pick(gen)];
      const Vector& b = post.particles()[pick(gen)];
      mc += std::abs((PathReward(a, 2, tau0) - PathReward(a, 2, tau1)) -
                     (PathReward(b, 2, tau0) - PathReward(b, 2, tau1))) / n;
    }
    const double exact = pbts_query_uncertainty(post, tau0, tau1);
    CHECK(exact == doctest::Approx(DoubleSum(post, tau0, tau1)).epsilon(1e-12));
    CHECK(std::abs(mc - exact) <= 0.01 * exact);
  }
  SUBCASE("large particle sets use the sorted path") {
    for (int count : {513, 700}) {
      RewardParticlePosterior post(RandomParticles(count, 4, 16 + count), 2);
      for (int j = 0; j < count; ++j) post.add_log_likelihood(j, std::sin(j));
      CHECK(pbts_query_uncertainty(post, tau0, tau1) ==
            doctest::Approx(DoubleSum(post, tau0, tau1)).epsilon(1e-10));
    }
  }
  SUBCASE("bounded by the spread of differences") {
    for (int trial = 0; trial < 20; ++trial) {
      const RewardParticlePosterior post(RandomParticles(2 + trial, 4, 100 + trial), 2);
      double lo = INFINITY, hi = -INFINITY;
      for (const Vector& r : post.particles()) {
        const double d = PathReward(r, 2, tau0) - PathReward(r, 2, tau1);
        lo = std::min(lo, d);
        hi = std::max(hi, d);
      }
      const double u = pbts_query_uncertainty(post, tau0, tau1);
      CHECK(u >= 0.0);
      CHECK(u <= hi - lo + 1e-12);
    }
  }
}

namespace {

struct PbtsRun {
  std::vector<EpisodeRecord> records;
  PbtsState state;
};

PbtsRun RunPbts(double epsilon, std::uint64_t seed, int episodes) {
  const TabularMdp env = oracle::random_mdp(3, 2, 3, 40);
  std::vector<Vector> particles = RandomParticles(16, env.n_pairs(), 41);
  particles[0] = env.reward;
  PbtsConfig config;
  config.epsilon = epsilon;
  PbtsRun run;
  run.state = make_pbts_state(env, particles, 1.0, config, Rng(seed));
  const PreferenceOracle oracle{LinkFunction::btl(), env};
  for (int t = 0; t < episodes; ++t) {
    run.records.push_back(pbts_episode(run.state, env, oracle, config));
  }
  return run;
}

int Queries(const PbtsRun& run) {
  int total = 0;
  for (const EpisodeRecord& r : run.records) total += r.z;
  return total;
}

}  // namespace

TEST_CASE("episodes update only what they observe") {
  const PbtsRun run = RunPbts(0.1, 17, 60);
  long long total = 0;
  for (long long c : run.state.transitions.counts()) total += c;
  CHECK(total == 60 * 2);
  DirichletTransitionPosterior replay(3, 2, 1.0);
  for (const EpisodeRecord& r : run.records) replay = update_transition_posterior(replay, r.tau0);
  CHECK(replay == run.state.transitions);

  CHECK(run.records[0].policy1 == Policy(3, 3, 0));
  for (std::size_t t = 1; t < run.records.size(); ++t) {
    CHECK(run.records[t].policy1 == run.records[t - 1].policy0);
    CHECK(run.records[t].z == (run.records[t].uncertainty > 0.1 ? 1 : 0));
    CHECK(run.records[t].queried_o.has_value() == (run.records[t].z == 1));
  }
}

TEST_CASE("threshold controls querying") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const PbtsRun never = RunPbts(INFINITY, 20 + seed, 50);
    CHECK(Queries(never) == 0);
    for (double lw : never.state.rewards.log_weights()) CHECK(lw == -std::log(16.0));
  }
  double low = 0.0, high = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    low += Queries(RunPbts(0.0, 30 + seed, 150));
    high += Queries(RunPbts(0.5, 30 + seed, 150));
  }
  CHECK(low >= high);
  CHECK(low > 0.0);
}

TEST_CASE("episodes replay identically") {
  const PbtsRun a = RunPbts(0.05, 50, 40);
  const PbtsRun b = RunPbts(0.05, 50, 40);
  for (std::size_t t = 0; t < a.records.size(); ++t) {
    CHECK(a.records[t].policy0 == b.records[t].policy0);
    CHECK(a.records[t].tau0 == b.records[t].tau0);
    CHECK(a.records[t].tau1 == b.records[t].tau1);
    CHECK(a.records[t].z == b.records[t].z);
    CHECK(a.records[t].queried_o == b.records[t].queried_o);
  }
  CHECK(a.state.rewards == b.state.rewards);
  CHECK(a.state.rng == b.state.rng);
}

TEST_CASE("a failing episode leaves the state untouched") {
  TabularMdp env;
  env.n_states = 1;
  env.n_actions = 2;
  env.horizon = 3;
  env.transition = {1.0, 1.0};
  env.reward = {0.0, 1.0};
  const PreferenceOracle affine{LinkFunction::affine(), env};
  PbtsConfig config;
  PbtsState state = make_pbts_state(env, {env.reward, {1.0, 0.0}}, 1.0, config, Rng(60));
  bool threw = false;
  for (int t = 0; t < 50 && !threw; ++t) {
    const PbtsState before = state;
    try {
      pbts_episode(state, env, affine, config);
    } catch (const std::invalid_argument&) {
      threw = true;
      CHECK(state.transitions == before.transitions);
      CHECK(state.rewards == before.rewards);
      CHECK(state.previous_policy == before.previous_policy);
      CHECK(state.episodes == before.episodes);
      CHECK(state.rng == before.rng);
    }
  }
  CHECK(threw);
}

TEST_CASE("configuration validation") {
  const TabularMdp env = oracle::random_mdp(2, 2, 2, 70);
  PbtsConfig bad;
  bad.epsilon = -1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  PbtsConfig action;
  action.initial_action = 2;
  CHECK_THROWS_AS(make_pbts_state(env, RandomParticles(2, 4, 1), 1.0, action, Rng(0)),
                  ConfigError);
  CHECK_THROWS_AS(make_pbts_state(env, RandomParticles(2, 3, 1), 1.0, PbtsConfig{}, Rng(0)),
                  ConfigError);
}
