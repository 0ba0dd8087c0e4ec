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

// File formats: run configuration, per-episode CSV and JSON lines, summaries,
// environment documents, posterior snapshots and plot-ready series. Every
// number is written with %.17g so files round-trip and compare byte-for-byte.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "prefrl/harness.hpp"

namespace prefrl::io {

using Json = nlohmann::ordered_json;

std::string format_double(double v);

// A configuration file: one run plus the optional sweep grid.
struct ExperimentConfig {
  RunConfig run;
  std::vector<double> betas;
  std::vector<std::uint64_t> seeds;
};

// Throws ConfigError on unknown keys, wrong types or invalid values.
ExperimentConfig parse_config(const Json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);
Json config_to_json(const ExperimentConfig& config);

inline constexpr const char* kEpisodesHeader = "run_id,t,regret_inc,regret_cum,Z,queries_cum";

// Data rows only, in episode order.
void append_episode_rows(std::string& out, const std::string& run_id, const RunMetrics& m);
std::string episodes_csv(const std::string& run_id, const RunMetrics& m);

Json episode_record_json(const EpisodeRecord& record);
std::string episodes_jsonl(const RunMetrics& m);

inline constexpr const char* kSweepHeader =
    "beta,epsilon,mean_final_regret,stderr_final_regret,mean_total_queries,"
    "stderr_total_queries,n_seeds";
std::string sweep_csv(const std::vector<SweepRow>& rows);

Json checks_json(const RunMetrics& m);
Json run_summary(const ExperimentConfig& config, const RunMetrics& m);
Json sweep_summary(const ExperimentConfig& config, const std::vector<SweepRow>& rows);

Json tabular_to_json(const TabularMdp& mdp);
TabularMdp tabular_from_json(const Json& doc);
Json linear_to_json(const LinearMdp& mdp);
LinearMdp linear_from_json(const Json& doc);
Json environment_to_json(const BuiltEnvironment& env, std::uint64_t seed);

Json posterior_json(const PbtsState& state);

// Writes to a sibling temporary file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);
// Throws ConfigError naming the path when it cannot be read.
std::string read_file(const std::filesystem::path& path);

struct EpisodeRow {
  std::string run_id;
  int t = 0;
  double regret_inc = 0.0;
  double regret_cum = 0.0;
  int z = 0;
  long long queries_cum = 0;
};

// Throws ConfigError on a malformed file.
std::vector<EpisodeRow> parse_episodes_csv(const std::string& text);

// round(i (n - 1) / (points - 1)) for i in [0, points); all indices when
// points >= n. The first and last index are always present.
std::vector<std::size_t> downsample_indices(std::size_t n, std::size_t points);

struct PlotData {
  std::string regret;   // run_id,t,regret_cum
  std::string queries;  // run_id,t,queries_cum
  std::string pareto;   // run_id,total_queries,final_regret,pareto_optimal
};

PlotData plot_data(const std::vector<EpisodeRow>& rows, std::size_t points);

}  // namespace prefrl::io
