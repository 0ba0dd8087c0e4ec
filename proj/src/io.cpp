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

#include "prefrl/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <system_error>

#include "prefrl/errors.hpp"

namespace prefrl::io {
namespace {

using Keys = std::set<std::string>;

void RequireObject(const Json& doc, const std::string& where) {
  if (!doc.is_object()) throw ConfigError(where + " must be a JSON object");
}

void RejectUnknown(const Json& doc, const Keys& allowed, const std::string& where) {
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    if (!allowed.count(it.key())) {
      throw ConfigError("unknown key '" + it.key() + "' in " + where);
    }
  }
}

template <typename T>
T Get(const Json& doc, const std::string& key, const std::string& where) {
  try {
    return doc.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(where + "." + key + " is missing or has the wrong type");
  }
}

template <typename T>
void Maybe(const Json& doc, const std::string& key, const std::string& where, T& out) {
  if (doc.contains(key)) out = Get<T>(doc, key, where);
}

int GetInt(const Json& doc, const std::string& key, const std::string& where) {
  const Json& v = doc.at(key);
  if (!v.is_number_integer()) throw ConfigError(where + "." + key + " must be an integer");
  return v.get<int>();
}

void MaybeInt(const Json& doc, const std::string& key, const std::string& where, int& out) {
  if (doc.contains(key)) out = GetInt(doc, key, where);
}

std::uint64_t GetSeed(const Json& v, const std::string& where) {
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
    throw ConfigError(where + " must be a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

EnvKind ParseEnvKind(const std::string& s) {
  if (s == "tabular") return EnvKind::kTabular;
  if (s == "linear") return EnvKind::kLinear;
  if (s == "bayesian_tabular") return EnvKind::kBayesianTabular;
  throw ConfigError("unknown environment kind '" + s + "'");
}

std::string EnvKindName(EnvKind k) {
  switch (k) {
    case EnvKind::kTabular: return "tabular";
    case EnvKind::kLinear: return "linear";
    case EnvKind::kBayesianTabular: return "bayesian_tabular";
  }
  return "";
}

AgentKind ParseAgentKind(const std::string& s) {
  if (s == "pr_lsvi") return AgentKind::kPrLsvi;
  if (s == "pbts") return AgentKind::kPbts;
  if (s == "random") return AgentKind::kRandom;
  throw ConfigError("unknown agent kind '" + s + "'");
}

std::string AgentKindName(AgentKind k) {
  switch (k) {
    case AgentKind::kPrLsvi: return "pr_lsvi";
    case AgentKind::kPbts: return "pbts";
    case AgentKind::kRandom: return "random";
  }
  return "";
}

Json Numbers(std::span<const double> values) {
  Json out = Json::array();
  for (double v : values) out.push_back(v);
  return out;
}

Vector ReadNumbers(const Json& doc, const std::string& key) {
  Vector out;
  try {
    for (const Json& v : doc.at(key)) out.push_back(v.get<double>());
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("environment." + key + " must be an array of numbers");
  }
  return out;
}

void AppendRow(std::string& out, std::initializer_list<std::string> cells) {
  bool first = true;
  for (const std::string& c : cells) {
    if (!first) out += ',';
    out += c;
    first = false;
  }
  out += '\n';
}

std::vector<std::string> SplitCsv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double ParseDouble(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ConfigError("malformed number '" + s + "' in episodes CSV");
  }
  if (used != s.size()) throw ConfigError("malformed number '" + s + "' in episodes CSV");
  return v;
}

long long ParseInt(const std::string& s) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(s, &used);
  } catch (const std::exception&) {
    throw ConfigError("malformed integer '" + s + "' in episodes CSV");
  }
  if (used != s.size()) throw ConfigError("malformed integer '" + s + "' in episodes CSV");
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

ExperimentConfig parse_config(const Json& doc) {
  RequireObject(doc, "config");
  RejectUnknown(doc, {"environment", "agent", "link", "episodes", "seed", "beta", "sweep"},
                "config");
  ExperimentConfig out;
  RunConfig& run = out.run;

  if (doc.contains("environment")) {
    const Json& e = doc.at("environment");
    RequireObject(e, "environment");
    RejectUnknown(e, {"kind", "n_states", "n_actions", "horizon", "d", "seed"}, "environment");
    if (e.contains("kind")) run.env.kind = ParseEnvKind(Get<std::string>(e, "kind", "environment"));
    MaybeInt(e, "n_states", "environment", run.env.n_states);
    MaybeInt(e, "n_actions", "environment", run.env.n_actions);
    MaybeInt(e, "horizon", "environment", run.env.horizon);
    MaybeInt(e, "d", "environment", run.env.dim);
    if (e.contains("seed")) run.env.seed = GetSeed(e.at("seed"), "environment.seed");
  }

  if (doc.contains("agent")) {
    const Json& a = doc.at("agent");
    RequireObject(a, "agent");
    RejectUnknown(a,
                  {"kind", "sigma_r", "sigma_p", "epsilon", "alpha_l", "alpha_u",
                   "ridge_lambda", "ball_radius", "query_mode", "mc_samples", "mode", "delta",
                   "initial_action", "mle_max_iterations", "mle_tolerance", "particles",
                   "prior_concentration"},
                  "agent");
    if (a.contains("kind")) run.agent = ParseAgentKind(Get<std::string>(a, "kind", "agent"));
    PrLsviConfig& p = run.pr_lsvi;
    Maybe(a, "sigma_r", "agent", p.sigma_r);
    Maybe(a, "sigma_p", "agent", p.sigma_p);
    Maybe(a, "alpha_l", "agent", p.alpha_l);
    Maybe(a, "alpha_u", "agent", p.alpha_u);
    Maybe(a, "ridge_lambda", "agent", p.ridge_lambda);
    if (a.contains("ball_radius")) {
      p.ball_radius = Get<double>(a, "ball_radius", "agent");
      run.ball_radius_from_env = false;
    }
    if (a.contains("query_mode")) {
      const std::string m = Get<std::string>(a, "query_mode", "agent");
      if (m == "closed_form") {
        p.query_mode = QueryMode::kClosedForm;
      } else if (m == "monte_carlo") {
        p.query_mode = QueryMode::kMonteCarlo;
      } else {
        throw ConfigError("unknown query_mode '" + m + "'");
      }
    }
    MaybeInt(a, "mc_samples", "agent", p.mc_samples);
    if (a.contains("mode")) {
      const std::string m = Get<std::string>(a, "mode", "agent");
      if (m == "practical") {
        p.mode = HyperparamMode::kPractical;
      } else if (m == "theory") {
        p.mode = HyperparamMode::kTheory;
      } else {
        throw ConfigError("unknown mode '" + m + "'");
      }
    }
    Maybe(a, "delta", "agent", run.theory_delta);
    MaybeInt(a, "mle_max_iterations", "agent", p.mle_max_iterations);
    Maybe(a, "mle_tolerance", "agent", p.mle_tolerance);
    double epsilon = 0.0;
    if (a.contains("epsilon")) {
      epsilon = Get<double>(a, "epsilon", "agent");
      p.epsilon = epsilon;
      run.pbts.epsilon = epsilon;
    }
    int initial_action = 0;
    MaybeInt(a, "initial_action", "agent", initial_action);
    p.initial_action = initial_action;
    run.pbts.initial_action = initial_action;
    MaybeInt(a, "particles", "agent", run.pbts.particles);
    Maybe(a, "prior_concentration", "agent", run.pbts.prior_concentration);
  }

  if (doc.contains("link")) {
    const std::string l = Get<std::string>(doc, "link", "config");
    if (l == "btl") {
      run.link = LinkKind::kBtl;
    } else if (l == "affine") {
      run.link = LinkKind::kAffine;
    } else {
      throw ConfigError("unknown link '" + l + "'");
    }
  }
  MaybeInt(doc, "episodes", "config", run.episodes);
  if (doc.contains("seed")) run.seed = GetSeed(doc.at("seed"), "seed");
  if (doc.contains("beta")) run.beta = Get<double>(doc, "beta", "config");

  if (doc.contains("sweep")) {
    const Json& s = doc.at("sweep");
    RequireObject(s, "sweep");
    RejectUnknown(s, {"betas", "seeds"}, "sweep");
    if (s.contains("betas")) {
      if (!s.at("betas").is_array()) throw ConfigError("sweep.betas must be an array");
      for (const Json& b : s.at("betas")) {
        if (!b.is_number()) throw ConfigError("sweep.betas must contain numbers");
        const double beta = b.get<double>();
        if (!(beta >= 0.0 && beta <= 0.5)) {
          throw ConfigError("sweep beta " + format_double(beta) + " outside [0, 0.5]");
        }
        out.betas.push_back(beta);
      }
    }
    if (s.contains("seeds")) {
      if (!s.at("seeds").is_array()) throw ConfigError("sweep.seeds must be an array");
      for (const Json& v : s.at("seeds")) out.seeds.push_back(GetSeed(v, "sweep.seeds"));
    } else {
      out.seeds.push_back(run.seed);
    }
  }
  run.validate();
  return out;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("cannot parse config " + path.string() + ": " + e.what());
  }
  return parse_config(doc);
}

Json config_to_json(const ExperimentConfig& config) {
  const RunConfig& run = config.run;
  const PrLsviConfig& p = run.pr_lsvi;
  Json env = {{"kind", EnvKindName(run.env.kind)},
              {"n_states", run.env.n_states},
              {"n_actions", run.env.n_actions},
              {"horizon", run.env.horizon},
              {"d", run.env.dim}};
  if (run.env.seed) env["seed"] = *run.env.seed;
  Json agent = {{"kind", AgentKindName(run.agent)}};
  if (run.agent == AgentKind::kPrLsvi) {
    agent["sigma_r"] = p.sigma_r;
    agent["sigma_p"] = p.sigma_p;
    agent["epsilon"] = p.epsilon;
    agent["alpha_l"] = p.alpha_l;
    agent["alpha_u"] = p.alpha_u;
    agent["ridge_lambda"] = p.ridge_lambda;
    if (!run.ball_radius_from_env) agent["ball_radius"] = p.ball_radius;
    agent["query_mode"] = p.query_mode == QueryMode::kClosedForm ? "closed_form" : "monte_carlo";
    agent["mc_samples"] = p.mc_samples;
    agent["mode"] = p.mode == HyperparamMode::kPractical ? "practical" : "theory";
    agent["delta"] = run.theory_delta;
    agent["initial_action"] = p.initial_action;
    agent["mle_max_iterations"] = p.mle_max_iterations;
    agent["mle_tolerance"] = p.mle_tolerance;
  } else {
    agent["epsilon"] = run.pbts.epsilon;
    agent["initial_action"] = run.pbts.initial_action;
    agent["particles"] = run.pbts.particles;
    agent["prior_concentration"] = run.pbts.prior_concentration;
  }
  Json out = {{"environment", env},
              {"agent", agent},
              {"link", run.link == LinkKind::kBtl ? "btl" : "affine"},
              {"episodes", run.episodes},
              {"seed", run.seed}};
  if (run.beta) out["beta"] = *run.beta;
  if (!config.betas.empty() || !config.seeds.empty()) {
    out["sweep"] = {{"betas", config.betas}, {"seeds", config.seeds}};
  }
  return out;
}

void append_episode_rows(std::string& out, const std::string& run_id, const RunMetrics& m) {
  for (std::size_t t = 0; t < m.regret_increments.size(); ++t) {
    AppendRow(out, {run_id, std::to_string(t + 1), format_double(m.regret_increments[t]),
                    format_double(m.cumulative_regret[t]), std::to_string(m.z[t]),
                    std::to_string(m.cumulative_queries[t])});
  }
}

std::string episodes_csv(const std::string& run_id, const RunMetrics& m) {
  std::string out = std::string(kEpisodesHeader) + "\n";
  append_episode_rows(out, run_id, m);
  return out;
}

Json episode_record_json(const EpisodeRecord& r) {
  Json out = {{"t", r.t}, {"Z", r.z}};
  if (r.queried_o) out["queried_o"] = *r.queried_o;
  out["uncertainty"] = r.uncertainty;
  out["regret_increment"] = r.regret_increment;
  out["policy_hashes"] = {r.policy0.hash(), r.policy1.hash()};
  return out;
}

std::string episodes_jsonl(const RunMetrics& m) {
  std::string out;
  for (const EpisodeRecord& r : m.records) {
    out += episode_record_json(r).dump();
    out += '\n';
  }
  return out;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = std::string(kSweepHeader) + "\n";
  for (const SweepRow& r : rows) {
    AppendRow(out, {format_double(r.beta), format_double(r.epsilon),
                    format_double(r.mean_final_regret), format_double(r.stderr_final_regret),
                    format_double(r.mean_total_queries), format_double(r.stderr_total_queries),
                    std::to_string(r.runs.size())});
  }
  return out;
}

Json checks_json(const RunMetrics& m) {
  Json out = Json::array();
  for (const InvariantCheck& c : m.checks) {
    out.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  }
  return out;
}

Json run_summary(const ExperimentConfig& config, const RunMetrics& m) {
  Json aggregates = {{"episodes", m.episodes},
                     {"optimal_value", m.optimal_value},
                     {"final_regret", m.final_regret()},
                     {"total_queries", m.total_queries()}};
  if (m.query_potential) {
    aggregates["query_potential"] = *m.query_potential;
    aggregates["query_potential_bound"] = *m.query_potential_bound;
  }
  return {{"config", config_to_json(config)},
          {"seed", m.seed},
          {"aggregates", aggregates},
          {"invariant_checks", checks_json(m)},
          {"all_checks_passed", m.all_checks_passed()}};
}

Json sweep_summary(const ExperimentConfig& config, const std::vector<SweepRow>& rows) {
  Json table = Json::array();
  bool all_passed = true;
  for (const SweepRow& r : rows) {
    Json runs = Json::array();
    for (const RunMetrics& m : r.runs) {
      all_passed = all_passed && m.all_checks_passed();
      runs.push_back({{"seed", m.seed},
                      {"final_regret", m.final_regret()},
                      {"total_queries", m.total_queries()},
                      {"invariant_checks", checks_json(m)}});
    }
    table.push_back({{"beta", r.beta},
                     {"epsilon", r.epsilon},
                     {"mean_final_regret", r.mean_final_regret},
                     {"stderr_final_regret", r.stderr_final_regret},
                     {"mean_total_queries", r.mean_total_queries},
                     {"stderr_total_queries", r.stderr_total_queries},
                     {"runs", runs}});
  }
  return {{"config", config_to_json(config)},
          {"sweep", table},
          {"all_checks_passed", all_passed}};
}

Json tabular_to_json(const TabularMdp& mdp) {
  return {{"kind", "tabular"},
          {"n_states", mdp.n_states},
          {"n_actions", mdp.n_actions},
          {"horizon", mdp.horizon},
          {"initial_state", mdp.initial_state},
          {"transition", Numbers(mdp.transition)},
          {"reward", Numbers(mdp.reward)}};
}

TabularMdp tabular_from_json(const Json& doc) {
  RequireObject(doc, "environment");
  TabularMdp mdp;
  mdp.n_states = GetInt(doc, "n_states", "environment");
  mdp.n_actions = GetInt(doc, "n_actions", "environment");
  mdp.horizon = GetInt(doc, "horizon", "environment");
  mdp.initial_state = GetInt(doc, "initial_state", "environment");
  mdp.transition = ReadNumbers(doc, "transition");
  mdp.reward = ReadNumbers(doc, "reward");
  try {
    mdp.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid tabular environment: ") + e.what());
  }
  return mdp;
}

Json linear_to_json(const LinearMdp& mdp) {
  return {{"kind", "linear"},
          {"d", mdp.dim()},
          {"n_states", mdp.n_states()},
          {"n_actions", mdp.n_actions()},
          {"horizon", mdp.horizon()},
          {"features", Numbers(mdp.features())},
          {"mu", Numbers(mdp.mu())},
          {"theta", Numbers(mdp.theta())},
          {"reward_bound", mdp.reward_bound()},
          {"feature_scale", mdp.feature_scale()}};
}

LinearMdp linear_from_json(const Json& doc) {
  RequireObject(doc, "environment");
  try {
    LinearMdp mdp(GetInt(doc, "d", "environment"), GetInt(doc, "n_states", "environment"),
                  GetInt(doc, "n_actions", "environment"),
                  GetInt(doc, "horizon", "environment"), ReadNumbers(doc, "features"),
                  ReadNumbers(doc, "mu"), ReadNumbers(doc, "theta"),
                  Get<double>(doc, "reward_bound", "environment"),
                  Get<double>(doc, "feature_scale", "environment"));
    mdp.validate();
    return mdp;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid linear environment: ") + e.what());
  }
}

Json environment_to_json(const BuiltEnvironment& env, std::uint64_t seed) {
  Json out = {{"seed", seed},
              {"link", env.oracle.link.name()},
              {"link_scale", env.oracle.link.scale()},
              {"truth", tabular_to_json(env.truth)}};
  if (env.linear) out["linear"] = linear_to_json(*env.linear);
  if (!env.particles.empty()) {
    Json particles = Json::array();
    for (const Vector& p : env.particles) particles.push_back(Numbers(p));
    out["reward_particles"] = particles;
  }
  return out;
}

Json posterior_json(const PbtsState& state) {
  const DirichletTransitionPosterior& t = state.transitions;
  Json concentrations = Json::array();
  for (int s = 0; s < t.n_states(); ++s) {
    for (int a = 0; a < t.n_actions(); ++a) {
      concentrations.push_back(Numbers(t.row_concentrations(s, a)));
    }
  }
  return {{"episodes", state.episodes},
          {"prior_concentration", t.prior()},
          {"concentrations", concentrations},
          {"weights", Numbers(state.rewards.weights())}};
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw std::runtime_error("cannot rename " + tmp.string() + ": " + ec.message());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in || std::filesystem::is_directory(path)) {
    throw ConfigError("cannot read " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<EpisodeRow> parse_episodes_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kEpisodesHeader) {
    throw ConfigError("episodes CSV has an unexpected header");
  }
  std::vector<EpisodeRow> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::vector<std::string> cells = SplitCsv(line);
    if (cells.size() != 6) {
      throw ConfigError("episodes CSV line " + std::to_string(line_no) + " has " +
                        std::to_string(cells.size()) + " fields");
    }
    rows.push_back({cells[0], static_cast<int>(ParseInt(cells[1])), ParseDouble(cells[2]),
                    ParseDouble(cells[3]), static_cast<int>(ParseInt(cells[4])),
                    ParseInt(cells[5])});
  }
  if (rows.empty()) throw ConfigError("episodes CSV has no data rows");
  return rows;
}

std::vector<std::size_t> downsample_indices(std::size_t n, std::size_t points) {
  std::vector<std::size_t> out;
  if (n == 0) return out;
  if (points >= n) {
    for (std::size_t i = 0; i < n; ++i) out.push_back(i);
    return out;
  }
  if (points <= 1) return {n - 1};
  for (std::size_t i = 0; i < points; ++i) {
    out.push_back(static_cast<std::size_t>(
        std::llround(static_cast<double>(i) * static_cast<double>(n - 1) /
                     static_cast<double>(points - 1))));
  }
  return out;
}

PlotData plot_data(const std::vector<EpisodeRow>& rows, std::size_t points) {
  // Group by run in order of first appearance.
  std::vector<std::string> order;
  std::map<std::string, std::vector<const EpisodeRow*>> runs;
  for (const EpisodeRow& r : rows) {
    auto [it, inserted] = runs.try_emplace(r.run_id);
    if (inserted) order.push_back(r.run_id);
    it->second.push_back(&r);
  }
  PlotData out;
  out.regret = "run_id,t,regret_cum\n";
  out.queries = "run_id,t,queries_cum\n";
  struct Final {
    std::string run_id;
    long long queries;
    double regret;
  };
  std::vector<Final> finals;
  for (const std::string& id : order) {
    const std::vector<const EpisodeRow*>& series = runs[id];
    for (std::size_t i : downsample_indices(series.size(), points)) {
      const EpisodeRow& r = *series[i];
      AppendRow(out.regret, {id, std::to_string(r.t), format_double(r.regret_cum)});
      AppendRow(out.queries, {id, std::to_string(r.t), std::to_string(r.queries_cum)});
    }
    finals.push_back({id, series.back()->queries_cum, series.back()->regret_cum});
  }
  std::sort(finals.begin(), finals.end(), [](const Final& a, const Final& b) {
    if (a.queries != b.queries) return a.queries < b.queries;
    if (a.regret != b.regret) return a.regret < b.regret;
    return a.run_id < b.run_id;
  });
  out.pareto = "run_id,total_queries,final_regret,pareto_optimal\n";
  double best = INFINITY;
  for (const Final& f : finals) {
    // Sorted by queries, so a point is non-dominated iff it beats every
    // cheaper point's regret.
    const bool optimal = f.regret < best;
    best = std::min(best, f.regret);
    AppendRow(out.pareto, {f.run_id, std::to_string(f.queries), format_double(f.regret),
                           optimal ? "1" : "0"});
  }
  return out;
}

}  // namespace prefrl::io
