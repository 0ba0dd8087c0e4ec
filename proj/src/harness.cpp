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

#include "prefrl/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>

#include "prefrl/errors.hpp"

namespace prefrl {
namespace {

constexpr std::uint64_t kEnvStream = 1;
constexpr std::uint64_t kAgentStream = 2;
constexpr std::uint64_t kBaselineStream = 3;

std::string Format(double v) {
  std::ostringstream out;
  out.precision(12);
  out << v;
  return out.str();
}

Vector UniformTable(std::size_t n, Rng& rng) {
  Vector out(n);
  for (double& v : out) v = rng.uniform();
  return out;
}

LinkFunction MakeLink(LinkKind kind, int horizon) {
  // Affine preferences need trajectory reward differences in [-1, 1].
  return kind == LinkKind::kBtl ? LinkFunction::btl()
                                : LinkFunction::affine(1.0 / horizon);
}

Policy RandomPolicy(int horizon, int n_states, int n_actions, Rng& rng) {
  Policy p(horizon, n_states, 0);
  for (int h = 0; h < horizon; ++h) {
    for (int s = 0; s < n_states; ++s) {
      p.set_action(h, s, static_cast<int>(rng.uniform_index(n_actions)));
    }
  }
  return p;
}

void AddCheck(RunMetrics& m, std::string name, bool passed, std::string detail) {
  m.checks.push_back({std::move(name), passed, std::move(detail)});
}

}  // namespace

void RunConfig::validate() const {
  if (episodes < 1) throw ConfigError("episodes must be >= 1");
  if (beta && !(*beta >= 0.0 && *beta <= 0.5)) {
    throw ConfigError("beta must lie in [0, 0.5] (got " + Format(*beta) + ")");
  }
  if (env.n_states < 1 || env.n_actions < 1 || env.horizon < 1) {
    throw ConfigError("environment dimensions must be >= 1");
  }
  if (env.kind == EnvKind::kLinear && env.dim < 1) {
    throw ConfigError("linear environment needs dim >= 1");
  }
  if (agent == AgentKind::kPbts && env.kind == EnvKind::kLinear) {
    throw ConfigError("PbTS requires a tabular environment");
  }
  if (agent == AgentKind::kPrLsvi) {
    PrLsviConfig c = pr_lsvi;
    c.epsilon = effective_epsilon();
    c.validate();
    if (c.initial_action >= env.n_actions) throw ConfigError("initial_action out of range");
    if (!(theory_delta > 0.0 && theory_delta < 1.0)) {
      throw ConfigError("theory_delta must lie in (0, 1)");
    }
  }
  if (agent == AgentKind::kPbts || env.kind == EnvKind::kBayesianTabular) {
    if (pbts.particles < 1) throw ConfigError("PbTS needs at least one particle");
    if (!(pbts.prior_concentration > 0.0)) {
      throw ConfigError("prior concentration must be positive");
    }
  }
  if (agent == AgentKind::kPbts) {
    PbtsConfig c{effective_epsilon(), pbts.initial_action};
    c.validate();
    if (c.initial_action >= env.n_actions) throw ConfigError("initial_action out of range");
  }
}

double RunConfig::effective_epsilon() const {
  if (beta) return std::pow(static_cast<double>(episodes), -*beta);
  return agent == AgentKind::kPbts ? pbts.epsilon : pr_lsvi.epsilon;
}

bool RunMetrics::all_checks_passed() const {
  return std::all_of(checks.begin(), checks.end(),
                     [](const InvariantCheck& c) { return c.passed; });
}

BuiltEnvironment build_environment(const RunConfig& config) {
  const EnvSpec& spec = config.env;
  Rng rng = Rng::derive(spec.seed.value_or(config.seed), kEnvStream);
  BuiltEnvironment out;
  switch (spec.kind) {
    case EnvKind::kTabular: {
      out.truth = random_tabular_mdp(spec.n_states, spec.n_actions, spec.horizon, rng);
      if (config.agent == AgentKind::kPbts) {
        out.particles.push_back(out.truth.reward);
        for (int j = 1; j < config.pbts.particles; ++j) {
          out.particles.push_back(UniformTable(out.truth.n_pairs(), rng));
        }
      }
      break;
    }
    case EnvKind::kBayesianTabular: {
      // Kernel and reward drawn from the PbTS prior.
      out.truth.n_states = spec.n_states;
      out.truth.n_actions = spec.n_actions;
      out.truth.horizon = spec.horizon;
      const Vector alpha(spec.n_states, config.pbts.prior_concentration);
      for (std::size_t p = 0; p < out.truth.n_pairs(); ++p) {
        const Vector row = rng.dirichlet(alpha);
        out.truth.transition.insert(out.truth.transition.end(), row.begin(), row.end());
      }
      for (int j = 0; j < config.pbts.particles; ++j) {
        out.particles.push_back(UniformTable(out.truth.n_pairs(), rng));
      }
      out.truth.reward = out.particles[rng.uniform_index(out.particles.size())];
      break;
    }
    case EnvKind::kLinear: {
      out.linear = random_linear_mdp(spec.dim, spec.n_states, spec.n_actions, spec.horizon,
                                     rng);
      out.truth = out.linear->induced();
      break;
    }
  }
  if (config.agent == AgentKind::kPrLsvi && !out.linear) {
    out.linear = tabular_to_linear(out.truth);
    out.truth = out.linear->induced();
  }
  out.oracle.link = MakeLink(config.link, spec.horizon);
  out.oracle.mdp = out.truth;
  return out;
}

RunMetrics run_agent(const TabularMdp& truth, int episodes,
                     const std::function<EpisodeRecord()>& next_episode) {
  const auto started = std::chrono::steady_clock::now();
  RunMetrics m;
  m.episodes = episodes;
  m.optimal_value = optimal_value_and_policy(truth, truth.reward).value;
  const double v_star = m.optimal_value;

  double cumulative = 0.0;
  long long queries = 0;
  double gap0_sum = 0.0;
  double first_comparator_gap = 0.0;
  double last_gap0 = 0.0;
  bool lag_ok = true;
  double min_increment = 0.0;
  m.records.reserve(episodes);
  for (int t = 0; t < episodes; ++t) {
    EpisodeRecord record = next_episode();
    const double v0 = exact_policy_value(truth, truth.reward, record.policy0);
    const double v1 = exact_policy_value(truth, truth.reward, record.policy1);
    record.regret_increment = 2.0 * v_star - v0 - v1;
    min_increment = std::min(min_increment, record.regret_increment);
    cumulative += record.regret_increment;
    queries += record.z;
    gap0_sum += v_star - v0;
    if (t == 0) first_comparator_gap = v_star - v1;
    last_gap0 = v_star - v0;
    if (t > 0 && !(record.policy1 == m.records.back().policy0)) lag_ok = false;
    m.regret_increments.push_back(record.regret_increment);
    m.cumulative_regret.push_back(cumulative);
    m.z.push_back(record.z);
    m.cumulative_queries.push_back(queries);
    m.records.push_back(std::move(record));
  }
  m.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  AddCheck(m, "regret_nonnegative", min_increment >= -1e-9,
           "min increment " + Format(min_increment));
  AddCheck(m, "series_length",
           static_cast<int>(m.regret_increments.size()) == episodes &&
               static_cast<int>(m.z.size()) == episodes,
           "T = " + std::to_string(episodes));
  double prefix = 0.0;
  double worst_prefix = 0.0;
  long long z_sum = 0;
  for (int t = 0; t < episodes; ++t) {
    prefix += m.regret_increments[t];
    z_sum += m.z[t];
    worst_prefix = std::max(worst_prefix, std::abs(prefix - m.cumulative_regret[t]));
  }
  AddCheck(m, "cumulative_prefix_sums",
           worst_prefix <= 1e-12 * std::max(1.0, std::abs(prefix)) && z_sum == queries,
           "max deviation " + Format(worst_prefix));
  AddCheck(m, "comparator_lag", lag_ok, "pi1_t == pi0_{t-1} for t >= 2");
  if (lag_ok && episodes > 0) {
    const double telescoped = 2.0 * gap0_sum + first_comparator_gap - last_gap0;
    const double deviation = std::abs(telescoped - cumulative);
    AddCheck(m, "regret_telescoping", deviation <= 1e-9 * std::max(1.0, std::abs(cumulative)),
             "deviation " + Format(deviation));
  }
  return m;
}

RunMetrics run(const RunConfig& config) {
  config.validate();
  if (config.agent == AgentKind::kRandom) return random_baseline_run(config);
  BuiltEnvironment built = build_environment(config);
  const Rng agent_rng = Rng::derive(config.seed, kAgentStream);
  const double epsilon = config.effective_epsilon();
  RunMetrics m;

  if (config.agent == AgentKind::kPrLsvi) {
    const LinearMdp& env = *built.linear;
    PrLsviConfig c = config.pr_lsvi;
    if (config.ball_radius_from_env) c.ball_radius = env.reward_bound();
    if (c.mode == HyperparamMode::kTheory) {
      const LinkConstants k = link_constants(built.oracle.link, env.horizon());
      const PrLsviConfig theory =
          theory_hyperparams(env.dim(), env.horizon(), config.episodes, c.ball_radius, k.kappa,
                             k.kappa_bar, config.theory_delta)
              .config;
      c.sigma_r = theory.sigma_r;
      c.sigma_p = theory.sigma_p;
      c.alpha_l = theory.alpha_l;
      c.alpha_u = theory.alpha_u;
      c.ridge_lambda = theory.ridge_lambda;
    }
    c.epsilon = epsilon;
    PrLsviState state = make_pr_lsvi_state(env, c, agent_rng);
    m = run_agent(built.truth, config.episodes,
                  [&] { return pr_lsvi_episode(state, env, built.oracle, c); });

    const double bound = 2.0 * env.dim() *
                         std::log((c.ridge_lambda + 4.0 * config.episodes) / c.ridge_lambda);
    m.query_potential = state.query_potential;
    m.query_potential_bound = bound;
    AddCheck(m, "elliptical_potential", state.query_potential <= bound,
             Format(state.query_potential) + " <= " + Format(bound));
    if (c.query_mode == QueryMode::kClosedForm) {
      const double radius = c.epsilon * std::sqrt(std::numbers::pi) / (2.0 * c.sigma_r);
      bool ok = true;
      for (const EpisodeRecord& r : m.records) {
        if (r.z == 0 && r.query_norm > radius * (1.0 + 1e-12)) ok = false;
      }
      AddCheck(m, "no_query_geometry", ok, "||dphi|| <= " + Format(radius) + " when Z = 0");
    }
  } else {
    PbtsConfig c{epsilon, config.pbts.initial_action};
    PbtsState state = make_pbts_state(built.truth, built.particles,
                                      config.pbts.prior_concentration, c, agent_rng);
    m = run_agent(built.truth, config.episodes,
                  [&] { return pbts_episode(state, built.truth, built.oracle, c); });
    m.final_pbts = std::move(state);
  }
  m.seed = config.seed;
  return m;
}

RunMetrics random_baseline_run(const RunConfig& config) {
  config.validate();
  RunConfig env_config = config;
  const BuiltEnvironment built = build_environment(env_config);
  const TabularMdp& truth = built.truth;
  Rng rng = Rng::derive(config.seed, kBaselineStream);
  int t = 0;
  RunMetrics m = run_agent(truth, config.episodes, [&] {
    EpisodeRecord r;
    r.t = ++t;
    r.policy0 = RandomPolicy(truth.horizon, truth.n_states, truth.n_actions, rng);
    r.policy1 = RandomPolicy(truth.horizon, truth.n_states, truth.n_actions, rng);
    return r;
  });
  // The comparator is not the previous policy here.
  std::erase_if(m.checks, [](const InvariantCheck& c) {
    return c.name == "comparator_lag" || c.name == "regret_telescoping";
  });
  m.seed = config.seed;
  return m;
}

std::vector<SweepRow> sweep_beta(const RunConfig& base, std::span<const double> betas,
                                 std::span<const std::uint64_t> seeds, int jobs) {
  if (seeds.empty()) throw ConfigError("sweep needs at least one seed");
  if (betas.empty()) throw ConfigError("sweep needs at least one beta");
  std::vector<RunConfig> configs;
  for (double beta : betas) {
    for (std::uint64_t seed : seeds) {
      RunConfig c = base;
      c.beta = beta;
      c.seed = seed;
      c.validate();
      configs.push_back(c);
    }
  }

  std::vector<std::optional<RunMetrics>> results(configs.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++) {
      try {
        results[i] = run(configs[i]);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const int threads = std::clamp(jobs, 1, static_cast<int>(configs.size()));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<SweepRow> rows;
  std::size_t k = 0;
  for (double beta : betas) {
    SweepRow row;
    row.beta = beta;
    row.epsilon = std::pow(static_cast<double>(base.episodes), -beta);
    for (std::size_t s = 0; s < seeds.size(); ++s) row.runs.push_back(std::move(*results[k++]));
    const double n = static_cast<double>(row.runs.size());
    double sum_r = 0.0, sum_q = 0.0;
    for (const RunMetrics& m : row.runs) {
      sum_r += m.final_regret();
      sum_q += static_cast<double>(m.total_queries());
    }
    row.mean_final_regret = sum_r / n;
    row.mean_total_queries = sum_q / n;
    if (row.runs.size() > 1) {
      double var_r = 0.0, var_q = 0.0;
      for (const RunMetrics& m : row.runs) {
        var_r += std::pow(m.final_regret() - row.mean_final_regret, 2);
        var_q += std::pow(static_cast<double>(m.total_queries()) - row.mean_total_queries, 2);
      }
      row.stderr_final_regret = std::sqrt(var_r / (n - 1.0) / n);
      row.stderr_total_queries = std::sqrt(var_q / (n - 1.0) / n);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace prefrl
