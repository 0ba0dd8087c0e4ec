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

// Self-contained invariant suites, one per module, run by `prefrl validate`.

#include <optional>
#include <string>
#include <vector>

#include "prefrl/harness.hpp"
#include "prefrl/io.hpp"

namespace prefrl {

struct SuiteReport {
  std::string name;
  std::vector<InvariantCheck> checks;
  bool passed() const;
};

struct ValidationReport {
  std::vector<SuiteReport> suites;
  bool passed() const;
  std::vector<std::string> failures() const;  // "suite/check: detail"
  io::Json to_json() const;
};

// Suite names in report order. "config" is only run when a config is given.
std::vector<std::string> suite_names(bool with_config);

// `config` is the raw document so that invalid values surface as a failing
// check instead of a parse error.
ValidationReport run_validation(const std::optional<io::Json>& config);

}  // namespace prefrl
