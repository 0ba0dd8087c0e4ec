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

#include <cstdlib>
#include <string_view>

#include "prefrl/kernels.hpp"

namespace prefrl::kernels {

#if PREFRL_HAVE_AVX2
const KernelTable& avx2_kernels();
#endif

const KernelTable* avx2_table() {
#if PREFRL_HAVE_AVX2
  __builtin_cpu_init();
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) {
    return &avx2_kernels();
  }
#endif
  return nullptr;
}

namespace {

const KernelTable& Resolve() {
  if (const char* forced = std::getenv("PREFRL_KERNELS")) {
    if (std::string_view(forced) == "scalar") return scalar_table();
  }
  if (const KernelTable* simd = avx2_table()) return *simd;
  return scalar_table();
}

}  // namespace

const KernelTable& active() {
  static const KernelTable& table = Resolve();
  return table;
}

}  // namespace prefrl::kernels
