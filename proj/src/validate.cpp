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

#include "prefrl/validate.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <functional>
#include <numbers>
#include <sstream>

#include "prefrl/errors.hpp"
#include "prefrl/linalg.hpp"
#include "prefrl/pbts.hpp"
#include "prefrl/pr_lsvi.hpp"
#include "prefrl/reward_mle.hpp"

namespace prefrl {
namespace {

class Suite {
 public:
  explicit Suite(std::string name) { report_.name = std::move(name); }

  void check(const std::string& name, bool passed, const std::string& detail = "") {
    report_.checks.push_back({name, passed, detail});
  }

  // Runs `body`; an exception becomes a failing check.
  void guarded(const std::string& name, const std::function<void()>& body) {
    try {
      body();
    } catch (const std::exception& e) {
      check(name, false, std::string("threw: ") + e.what());
    }
  }

  SuiteReport take() { return std::move(report_); }

 private:
  SuiteReport report_;
};

std::string Num(double v) { return io::format_double(v); }

Vector RandomVector(int n, Rng& rng) {
  Vector v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

PsdMatrix RandomPsd(int d, Rng& rng) {
  PsdMatrix m = PsdMatrix::scaled_identity(d, 1.0);
  for (int i = 0; i < 2 * d; ++i) m.rank_one_update_in_place(RandomVector(d, rng));
  return m;
}

SuiteReport EnvSuite() {
  Suite s("env");
  s.guarded("env", [&] {
    Rng rng(11);
    const TabularMdp mdp = random_tabular_mdp(5, 3, 4, rng);
    bool rows_ok = true;
    try {
      mdp.validate();
    } catch (const std::exception&) {
      rows_ok = false;
    }
    s.check("transition_rows_stochastic", rows_ok);

    const LinearMdp lin = tabular_to_linear(mdp);
    double worst = 0.0;
    for (std::size_t i = 0; i < mdp.transition.size(); ++i) {
      worst = std::max(worst, std::abs(mdp.transition[i] - lin.induced().transition[i]));
    }
    for (std::size_t i = 0; i < mdp.reward.size(); ++i) {
      worst = std::max(worst, std::abs(mdp.reward[i] - lin.induced().reward[i]));
    }
    s.check("tabular_embedding_exact", worst <= 1e-12, "max deviation " + Num(worst));

    const LinearMdp soft = random_linear_mdp(4, 6, 2, 3, rng);
    bool linear_ok = true;
    try {
      soft.validate();
    } catch (const std::exception&) {
      linear_ok = false;
    }
    s.check("linear_mdp_valid", linear_ok);

    const LinkFunction btl = LinkFunction::btl();
    double sym = 0.0;
    for (double x : {-5.0, -1.0, -0.1, 0.0, 0.3, 2.0, 30.0}) {
      sym = std::max(sym, std::abs(btl.value(x) + btl.value(-x) - 1.0));
    }
    s.check("btl_symmetry", sym <= 1e-15, "max deviation " + Num(sym));

    const OptimalSolution opt = optimal_value_and_policy(mdp, mdp.reward);
    const double v_opt = exact_policy_value(mdp, mdp.reward, opt.policy);
    s.check("optimal_policy_value", std::abs(v_opt - opt.value) <= 1e-12,
            Num(v_opt) + " vs " + Num(opt.value));
    bool dominates = true;
    for (int trial = 0; trial < 50; ++trial) {
      Policy p(mdp.horizon, mdp.n_states, 0);
      for (int h = 0; h < mdp.horizon; ++h) {
        for (int st = 0; st < mdp.n_states; ++st) {
          p.set_action(h, st, static_cast<int>(rng.uniform_index(mdp.n_actions)));
        }
      }
      if (exact_policy_value(mdp, mdp.reward, p) > opt.value + 1e-12) dominates = false;
    }
    s.check("optimal_value_dominates", dominates);
  });
  return s.take();
}

SuiteReport LinalgSuite() {
  Suite s("linalg");
  s.guarded("linalg", [&] {
    Rng rng(12);
    double update_err = 0.0, solve_err = 0.0, norm_err = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      const int d = 1 + static_cast<int>(rng.uniform_index(8));
      PsdMatrix m = RandomPsd(d, rng);
      const Vector x = RandomVector(d, rng);
      const PsdMatrix updated = m.rank_one_update(x);
      Vector dense(m.dense().begin(), m.dense().end());
      for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) dense[i * d + j] += x[i] * x[j];
      }
      const PsdMatrix refactored = PsdMatrix::from_dense(d, dense);
      for (std::size_t k = 0; k < dense.size(); ++k) {
        update_err = std::max(update_err, std::abs(updated.factor()[k] - refactored.factor()[k]));
      }
      const Vector b = RandomVector(d, rng);
      const Vector sol = ridge_solve(updated, b);
      for (int i = 0; i < d; ++i) {
        double r = -b[i];
        for (int j = 0; j < d; ++j) r += updated.at(i, j) * sol[j];
        solve_err = std::max(solve_err, std::abs(r));
      }
      // x^T A^{-1} x computed two ways.
      const double inv = mahalanobis(x, updated, NormMode::kInverse);
      const Vector ax = ridge_solve(updated, x);
      double quad = 0.0;
      for (int i = 0; i < d; ++i) quad += x[i] * ax[i];
      norm_err = std::max(norm_err, std::abs(inv * inv - quad) / std::max(1.0, quad));
    }
    s.check("rank_one_update_matches_refactorization", update_err <= 1e-9,
            "max deviation " + Num(update_err));
    s.check("solve_residual", solve_err <= 1e-9, "max residual " + Num(solve_err));
    s.check("inverse_norm_consistent", norm_err <= 1e-10, "max deviation " + Num(norm_err));

    bool rejected = false;
    try {
      PsdMatrix::from_dense(2, {1.0, 2.0, 2.0, 1.0});
    } catch (const NumericalError&) {
      rejected = true;
    }
    s.check("indefinite_rejected", rejected);
  });
  return s.take();
}

SuiteReport RewardMleSuite() {
  Suite s("reward_mle");
  s.guarded("reward_mle", [&] {
    Rng rng(13);
    const int d = 3;
    const Vector truth = {0.8, -0.5, 0.3};
    const LinkFunction link = LinkFunction::btl();
    PreferenceDataset data(d);
    for (int i = 0; i < 300; ++i) {
      Vector x = RandomVector(d, rng);
      double gap = 0.0;
      for (int k = 0; k < d; ++k) gap += x[k] * truth[k];
      data.add({x, rng.uniform() < link.value(gap) ? 1 : 0, 1});
    }
    const Vector theta = {0.1, 0.2, -0.3};
    const Vector grad = log_likelihood_gradient(theta, data, link);
    double fd_err = 0.0;
    for (int k = 0; k < d; ++k) {
      Vector plus = theta, minus = theta;
      plus[k] += 1e-5;
      minus[k] -= 1e-5;
      const double fd =
          (log_likelihood(plus, data, link) - log_likelihood(minus, data, link)) / 2e-5;
      fd_err = std::max(fd_err, std::abs(fd - grad[k]));
    }
    s.check("gradient_finite_difference", fd_err <= 1e-5, "max deviation " + Num(fd_err));

    MleConfig config;
    config.ball_radius = 2.0;
    const MleResult fit = mle_fit(data, link, config);
    double norm = 0.0;
    for (double v : fit.theta) norm += v * v;
    s.check("estimate_in_ball", std::sqrt(norm) <= config.ball_radius * (1.0 + 1e-12),
            "norm " + Num(std::sqrt(norm)));
    const double at_zero = log_likelihood(Vector(d, 0.0), data, link);
    s.check("likelihood_improves", fit.log_likelihood >= at_zero,
            Num(fit.log_likelihood) + " >= " + Num(at_zero));
    double err = 0.0;
    for (int k = 0; k < d; ++k) err = std::max(err, std::abs(fit.theta[k] - truth[k]));
    s.check("estimate_near_truth", err <= 0.5, "max deviation " + Num(err));
  });
  return s.take();
}

SuiteReport PrLsviSuite() {
  Suite s("pr_lsvi");
  s.guarded("pr_lsvi", [&] {
    Rng rng(14);
    double jump = 0.0;
    bool cap_exact = true;
    for (int trial = 0; trial < 100; ++trial) {
      // Blend slope |cap - linear| / (alpha_u - alpha_l) below 4.
      const double alpha_l = 0.05 + 0.45 * rng.uniform();
      const double alpha_u = alpha_l + 1.0 + rng.uniform();
      const double cap = static_cast<double>(rng.uniform_index(4));
      const double linear = 2.0 * rng.uniform() - 1.0;
      for (double edge : {alpha_l, alpha_u}) {
        jump = std::max(jump, std::abs(omega_blend(edge + 1e-7, linear, alpha_l, alpha_u, cap) -
                                       omega_blend(edge - 1e-7, linear, alpha_l, alpha_u, cap)));
      }
      if (omega_blend(alpha_u + 0.5, linear, alpha_l, alpha_u, cap) != cap) cap_exact = false;
    }
    s.check("omega_continuous", jump <= 1e-6, "max jump " + Num(jump));
    s.check("omega_cap_exact", cap_exact);

    double rel = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
      const int d = 1 + static_cast<int>(rng.uniform_index(6));
      const PsdMatrix cov = RandomPsd(d, rng);
      const Vector dphi = RandomVector(d, rng);
      const double closed = query_uncertainty_closed(dphi, cov, 0.7);
      const double mc = query_uncertainty_mc(Vector(d, 0.0), 0.7, cov, dphi, 20000, rng);
      rel = std::max(rel, std::abs(mc - closed) / closed);
    }
    s.check("query_uncertainty_mc_matches_closed_form", rel <= 0.05,
            "max relative deviation " + Num(rel));

    const LinkConstants k = link_constants(LinkFunction::btl(), 3);
    const TheoryHyperparams th = theory_hyperparams(8, 3, 1000, 3.0 * std::sqrt(8.0), k.kappa,
                                                    k.kappa_bar);
    s.check("theory_constants_settle",
            th.iterations <= 100 && th.config.alpha_l < th.config.alpha_u &&
                th.config.sigma_r > 0.0 && th.config.sigma_p > 0.0,
            "chi " + Num(th.chi) + " after " + std::to_string(th.iterations) + " iterations");

    bool rejected = false;
    PrLsviConfig bad;
    bad.alpha_l = 0.6;
    bad.alpha_u = 0.5;
    try {
      bad.validate();
    } catch (const ConfigError&) {
      rejected = true;
    }
    s.check("alpha_order_enforced", rejected);
  });
  return s.take();
}

SuiteReport PbtsSuite() {
  Suite s("pbts");
  s.guarded("pbts", [&] {
    Rng rng(15);
    const TabularMdp env = random_tabular_mdp(3, 2, 3, rng);
    std::vector<Vector> particles = {env.reward};
    for (int j = 0; j < 15; ++j) {
      Vector r(env.n_pairs());
      for (double& v : r) v = rng.uniform();
      particles.push_back(r);
    }
    PreferenceOracle oracle{LinkFunction::btl(), env};
    const PbtsConfig config{0.05, 0};
    PbtsState state = make_pbts_state(env, particles, 1.0, config, Rng(16));
    std::vector<long long> counts(env.n_pairs() * env.n_states, 0);
    Vector log_w(particles.size(), -std::log(static_cast<double>(particles.size())));
    for (int t = 0; t < 100; ++t) {
      const EpisodeRecord r = pbts_episode(state, env, oracle, config);
      for (std::size_t h = 0; h + 1 < r.tau0.steps.size(); ++h) {
        const StateAction& sa = r.tau0.steps[h];
        ++counts[env.pair_index(sa.state, sa.action) * env.n_states + r.tau0.steps[h + 1].state];
      }
      if (r.z == 1) {
        for (std::size_t j = 0; j < particles.size(); ++j) {
          const double gap = trajectory_reward(particles[j], env.n_actions, r.tau1) -
                             trajectory_reward(particles[j], env.n_actions, r.tau0);
          log_w[j] += std::log(*r.queried_o == 1 ? oracle.link.value(gap)
                                                 : oracle.link.value(-gap));
        }
      }
    }
    const std::span<const long long> got = state.transitions.counts();
    s.check("dirichlet_counts_exact", std::equal(got.begin(), got.end(), counts.begin()));
    double lw_err = 0.0;
    for (std::size_t j = 0; j < particles.size(); ++j) {
      lw_err = std::max(lw_err, std::abs(state.rewards.log_weights()[j] - log_w[j]));
    }
    s.check("log_weights_exact", lw_err <= 1e-12, "max deviation " + Num(lw_err));
    const Vector w = state.rewards.weights();
    double total = 0.0;
    for (double v : w) total += v;
    s.check("weights_normalized", std::abs(total - 1.0) <= 1e-12, "sum " + Num(total));

    const OptimalSolution planned =
        plan_value_iteration(env.transition, env.reward, env.n_states, env.n_actions,
                             env.horizon);
    const OptimalSolution reference = optimal_value_and_policy(env, env.reward);
    s.check("planner_matches_dynamic_programming",
            std::abs(planned.value - reference.value) <= 1e-12 &&
                planned.policy == reference.policy);

    // Direct double sum against the library's uncertainty.
    Trajectory tau0 = rollout(env, Policy(env.horizon, env.n_states, 0), rng);
    Trajectory tau1 = rollout(env, Policy(env.horizon, env.n_states, 1), rng);
    double direct = 0.0;
    for (std::size_t j = 0; j < particles.size(); ++j) {
      for (std::size_t k = 0; k < particles.size(); ++k) {
        const double dj = trajectory_reward(particles[j], env.n_actions, tau0) -
                          trajectory_reward(particles[j], env.n_actions, tau1);
        const double dk = trajectory_reward(particles[k], env.n_actions, tau0) -
                          trajectory_reward(particles[k], env.n_actions, tau1);
        direct += w[j] * w[k] * std::abs(dj - dk);
      }
    }
    const double lib = pbts_query_uncertainty(state.rewards, tau0, tau1);
    s.check("query_uncertainty_exact", std::abs(direct - lib) <= 1e-12,
            Num(lib) + " vs " + Num(direct));
  });
  return s.take();
}

SuiteReport HarnessSuite() {
  Suite s("harness");
  s.guarded("harness", [&] {
    RunConfig base;
    base.episodes = 60;
    base.seed = 7;
    base.beta = 0.5;
    for (AgentKind agent : {AgentKind::kPrLsvi, AgentKind::kPbts, AgentKind::kRandom}) {
      RunConfig c = base;
      c.agent = agent;
      const RunMetrics a = run(c);
      const RunMetrics b = run(c);
      const std::string label = agent == AgentKind::kPrLsvi ? "pr_lsvi"
                                : agent == AgentKind::kPbts ? "pbts"
                                                            : "random";
      for (const InvariantCheck& chk : a.checks) {
        s.check(label + "." + chk.name, chk.passed, chk.detail);
      }
      s.check(label + ".deterministic",
              a.regret_increments == b.regret_increments && a.z == b.z);
    }
    RunConfig linear = base;
    linear.env.kind = EnvKind::kLinear;
    const RunMetrics m = run(linear);
    s.check("linear_environment_checks", m.all_checks_passed());
  });
  return s.take();
}

SuiteReport ConfigSuite(const io::Json& doc) {
  Suite s("config");
  if (doc.is_object() && doc.contains("agent") && doc.at("agent").is_object()) {
    const io::Json& a = doc.at("agent");
    if (a.contains("alpha_l") && a.contains("alpha_u") && a.at("alpha_l").is_number() &&
        a.at("alpha_u").is_number()) {
      const double lo = a.at("alpha_l").get<double>();
      const double hi = a.at("alpha_u").get<double>();
      s.check("alpha_l_below_alpha_u", lo < hi, "alpha_l " + Num(lo) + ", alpha_u " + Num(hi));
    }
  }
  try {
    io::parse_config(doc);
    s.check("config_valid", true);
  } catch (const ConfigError& e) {
    s.check("config_valid", false, e.what());
  }
  return s.take();
}

}  // namespace

bool SuiteReport::passed() const {
  return std::all_of(checks.begin(), checks.end(),
                     [](const InvariantCheck& c) { return c.passed; });
}

bool ValidationReport::passed() const {
  return std::all_of(suites.begin(), suites.end(),
                     [](const SuiteReport& s) { return s.passed(); });
}

std::vector<std::string> ValidationReport::failures() const {
  std::vector<std::string> out;
  for (const SuiteReport& s : suites) {
    for (const InvariantCheck& c : s.checks) {
      if (!c.passed) out.push_back(s.name + "/" + c.name + ": " + c.detail);
    }
  }
  return out;
}

io::Json ValidationReport::to_json() const {
  io::Json suites_json = io::Json::array();
  for (const SuiteReport& s : suites) {
    io::Json checks = io::Json::array();
    for (const InvariantCheck& c : s.checks) {
      checks.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
    }
    suites_json.push_back({{"name", s.name}, {"passed", s.passed()}, {"checks", checks}});
  }
  return {{"passed", passed()}, {"suites", suites_json}};
}

std::vector<std::string> suite_names(bool with_config) {
  std::vector<std::string> names = {"env", "linalg", "reward_mle", "pr_lsvi", "pbts", "harness"};
  if (with_config) names.push_back("config");
  return names;
}

ValidationReport run_validation(const std::optional<io::Json>& config) {
  ValidationReport report;
  report.suites.push_back(EnvSuite());
  report.suites.push_back(LinalgSuite());
  report.suites.push_back(RewardMleSuite());
  report.suites.push_back(PrLsviSuite());
  report.suites.push_back(PbtsSuite());
  report.suites.push_back(HarnessSuite());
  if (config) report.suites.push_back(ConfigSuite(*config));
  return report;
}

}  // namespace prefrl
