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

#include <stdexcept>
#include <string>

namespace prefrl {

// Malformed configuration or inconsistent run setup. The CLI maps it to
// exit code 2. Argument errors on individual operations use
// std::invalid_argument.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Loss of positive definiteness, non-finite objectives and similar. The CLI
// maps it to exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Every reward particle has been ruled out by the observed preferences.
class ModelMisspecificationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace prefrl
