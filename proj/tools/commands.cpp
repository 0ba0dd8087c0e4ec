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

#include "commands.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <ostream>
#include <stdexcept>

#include "CLI11.hpp"

#include "prefrl/errors.hpp"
#include "prefrl/harness.hpp"
#include "prefrl/io.hpp"
#include "prefrl/validate.hpp"

namespace prefrl::cli {
namespace {

namespace fs = std::filesystem;

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  bool quiet = false;
  bool json = false;
  std::size_t points = 100;
};

std::string OutDir(const Options& opts) {
  if (!opts.out.empty()) return opts.out;
  if (const char* env = std::getenv("PREFRL_OUT")) return env;
  throw ConfigError("no output directory (pass --out or set PREFRL_OUT)");
}

std::optional<std::uint64_t> SeedOverride(const Options& opts) {
  if (opts.seed) return opts.seed;
  if (const char* env = std::getenv("PREFRL_SEED")) {
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(env, &used);
      if (used == std::string(env).size()) return v;
    } catch (const std::exception&) {
    }
    throw ConfigError(std::string("PREFRL_SEED is not a non-negative integer: ") + env);
  }
  return std::nullopt;
}

io::ExperimentConfig LoadConfig(const Options& opts) {
  if (opts.config.empty()) throw ConfigError("--config is required");
  io::ExperimentConfig config = io::load_config(opts.config);
  if (const auto seed = SeedOverride(opts)) {
    config.run.seed = *seed;
    config.seeds = {*seed};
  }
  return config;
}

void EnsureDir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir.string());
}

std::string RunId(double beta, std::uint64_t seed) {
  return "beta" + io::format_double(beta) + "_seed" + std::to_string(seed);
}

int CmdRun(const Options& opts, std::ostream& out) {
  const io::ExperimentConfig config = LoadConfig(opts);
  const fs::path dir = OutDir(opts);
  const RunMetrics m = run(config.run);
  const BuiltEnvironment env = build_environment(config.run);

  // Everything is rendered before the first file is written.
  const std::string run_id = "seed" + std::to_string(config.run.seed);
  std::vector<std::pair<std::string, std::string>> files = {
      {"episodes.csv", io::episodes_csv(run_id, m)},
      {"episodes.jsonl", io::episodes_jsonl(m)},
      {"environment.json",
       io::environment_to_json(env, config.run.env.seed.value_or(config.run.seed)).dump(2) +
           "\n"},
      {"summary.json", io::run_summary(config, m).dump(2) + "\n"}};
  if (m.final_pbts) files.emplace_back("posterior.json", io::posterior_json(*m.final_pbts).dump(2) + "\n");
  EnsureDir(dir);
  for (const auto& [name, content] : files) io::write_file_atomic(dir / name, content);
  if (!opts.quiet) {
    out << "episodes " << m.episodes << ", final regret " << io::format_double(m.final_regret())
        << ", queries " << m.total_queries() << ", checks "
        << (m.all_checks_passed() ? "passed" : "FAILED") << "\n";
  }
  return kExitOk;
}

int CmdSweep(const Options& opts, std::ostream& out) {
  const io::ExperimentConfig config = LoadConfig(opts);
  if (config.betas.empty()) throw ConfigError("sweep.betas is missing or empty");
  if (config.seeds.empty()) throw ConfigError("sweep.seeds is empty");
  const fs::path dir = OutDir(opts);
  const std::vector<SweepRow> rows =
      sweep_beta(config.run, config.betas, config.seeds, std::max(1, opts.jobs));

  std::vector<std::pair<std::string, std::string>> files;
  std::string combined = std::string(io::kEpisodesHeader) + "\n";
  for (const SweepRow& row : rows) {
    for (const RunMetrics& m : row.runs) {
      const std::string id = RunId(row.beta, m.seed);
      io::append_episode_rows(combined, id, m);
      files.emplace_back("runs/" + id + ".csv", io::episodes_csv(id, m));
    }
  }
  files.emplace_back("episodes.csv", combined);
  files.emplace_back("sweep.csv", io::sweep_csv(rows));
  files.emplace_back("summary.json", io::sweep_summary(config, rows).dump(2) + "\n");
  EnsureDir(dir / "runs");
  for (const auto& [name, content] : files) io::write_file_atomic(dir / name, content);
  if (!opts.quiet) {
    for (const SweepRow& row : rows) {
      out << "beta " << io::format_double(row.beta) << ": mean final regret "
          << io::format_double(row.mean_final_regret) << ", mean queries "
          << io::format_double(row.mean_total_queries) << "\n";
    }
  }
  return kExitOk;
}

int CmdValidate(const Options& opts, std::ostream& out, std::ostream& err) {
  std::optional<io::Json> doc;
  if (!opts.config.empty()) {
    const std::string text = io::read_file(opts.config);
    try {
      doc = io::Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError("cannot parse config " + opts.config + ": " + e.what());
    }
  }
  const ValidationReport report = run_validation(doc);
  const io::Json json = report.to_json();
  if (!opts.out.empty()) {
    EnsureDir(opts.out);
    io::write_file_atomic(fs::path(opts.out) / "validation.json", json.dump(2) + "\n");
  }
  if (opts.json) {
    out << json.dump(2) << "\n";
  } else if (!opts.quiet) {
    for (const SuiteReport& s : report.suites) {
      out << s.name << ": " << (s.passed() ? "PASS" : "FAIL") << " (" << s.checks.size()
          << " checks)\n";
    }
  }
  for (const std::string& f : report.failures()) err << "FAIL " << f << "\n";
  return report.passed() ? kExitOk : kExitValidationFailed;
}

int CmdPlotData(const Options& opts, std::ostream& out) {
  const fs::path dir = OutDir(opts);
  if (opts.points < 2) throw ConfigError("--points must be >= 2");
  const std::vector<io::EpisodeRow> rows =
      io::parse_episodes_csv(io::read_file(dir / "episodes.csv"));
  const io::PlotData data = io::plot_data(rows, opts.points);
  io::write_file_atomic(dir / "plot_regret.csv", data.regret);
  io::write_file_atomic(dir / "plot_queries.csv", data.queries);
  io::write_file_atomic(dir / "plot_pareto.csv", data.pareto);
  if (!opts.quiet) out << "wrote plot_regret.csv, plot_queries.csv, plot_pareto.csv\n";
  return kExitOk;
}

}  // namespace

int main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Preference-based RL experiments", "prefrl"};
  app.require_subcommand(1);
  Options opts;

  auto add_common = [&opts](CLI::App* cmd, bool needs_config) {
    auto* config = cmd->add_option("--config", opts.config, "Configuration file (JSON)");
    if (needs_config) config->required();
    cmd->add_option("--out", opts.out, "Output directory (default: $PREFRL_OUT)");
    cmd->add_flag("--quiet", opts.quiet, "Suppress progress output");
  };
  CLI::App* run_cmd = app.add_subcommand("run", "Run one experiment");
  add_common(run_cmd, true);
  CLI::App* sweep_cmd = app.add_subcommand("sweep", "Sweep beta over seeds");
  add_common(sweep_cmd, true);
  CLI::App* validate_cmd = app.add_subcommand("validate", "Run the invariant suites");
  add_common(validate_cmd, false);
  validate_cmd->add_flag("--json", opts.json, "Print the report as JSON");
  CLI::App* plot_cmd = app.add_subcommand("plot-data", "Emit plot-ready series");
  plot_cmd->add_option("--out", opts.out, "Directory holding episodes.csv");
  plot_cmd->add_option("--points", opts.points, "Points per series (default 100)");
  plot_cmd->add_flag("--quiet", opts.quiet, "Suppress progress output");
  for (CLI::App* cmd : {run_cmd, sweep_cmd}) {
    cmd->add_option("--seed", opts.seed, "Master seed override (default: $PREFRL_SEED)");
  }
  sweep_cmd->add_option("--jobs", opts.jobs, "Concurrent runs (default 1)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfigError;
  }

  try {
    if (run_cmd->parsed()) return CmdRun(opts, out);
    if (sweep_cmd->parsed()) return CmdSweep(opts, out);
    if (validate_cmd->parsed()) return CmdValidate(opts, out, err);
    return CmdPlotData(opts, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return kExitNumericalError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidationFailed;
  }
}

}  // namespace prefrl::cli
