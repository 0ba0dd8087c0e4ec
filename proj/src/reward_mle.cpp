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

#include "prefrl/reward_mle.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "prefrl/errors.hpp"
#include "prefrl/kernels.hpp"

namespace prefrl {
namespace {

constexpr double kAffineEdge = 1e-9;

struct LogTerm {
  double value;  // ln Phi(x)
  double slope;  // d/dx ln Phi(x)
  bool clamped;
};

// ln Phi(x) and its derivative. With `clamp` the affine argument is pulled
// inside (-1, 1) by kAffineEdge and the slope is the one at the edge, which
// points back into the domain on the side where Phi vanishes; without it an
// out-of-domain argument throws.
LogTerm LogLink(const LinkFunction& link, double x, bool clamp) {
  const double s = link.scale();
  const double u = s * x;
  if (link.kind() == LinkKind::kBtl) {
    // ln sigmoid(u), slope s * sigmoid(-u)
    if (u >= 0.0) {
      const double e = std::exp(-u);
      return {-std::log1p(e), s * e / (1.0 + e), false};
    }
    const double e = std::exp(u);
    return {u - std::log1p(e), s / (1.0 + e), false};
  }
  if (u < -1.0 || u > 1.0) {
    if (!clamp) link.value(x);  // throws with the standard message
    const double edge = u < 0.0 ? -1.0 + kAffineEdge : 1.0 - kAffineEdge;
    return {std::log(0.5 * (edge + 1.0)), s / (edge + 1.0), true};
  }
  if (clamp && (u < -1.0 + kAffineEdge || u > 1.0 - kAffineEdge)) {
    const double edge = u < 0.0 ? -1.0 + kAffineEdge : 1.0 - kAffineEdge;
    return {std::log(0.5 * (edge + 1.0)), s / (edge + 1.0), false};
  }
  return {std::log(0.5 * (u + 1.0)), s / (u + 1.0), false};
}

// Queried records with identical (dphi, o) merged into one weighted entry.
struct WeightedRecord {
  Vector delta_phi;
  int o;
  double count;
};

std::vector<WeightedRecord> Compact(const PreferenceDataset& data) {
  std::map<std::pair<Vector, int>, double> counts;
  for (const PreferenceRecord& r : data.records()) {
    if (r.z == 1) counts[{r.delta_phi, r.o}] += 1.0;
  }
  std::vector<WeightedRecord> out;
  out.reserve(counts.size());
  for (auto& [key, count] : counts) out.push_back({key.first, key.second, count});
  return out;
}

struct Evaluation {
  double value = 0.0;
  Vector gradient;
  int clamps = 0;
};

Evaluation Evaluate(std::span<const double> theta, const std::vector<WeightedRecord>& records,
                    const LinkFunction& link, bool clamp, bool want_gradient) {
  Evaluation out;
  if (want_gradient) out.gradient.assign(theta.size(), 0.0);
  for (const WeightedRecord& r : records) {
    const double u = kernels::dot(r.delta_phi, theta);
    // o = 1: ln Phi(u); o = 0: ln Phi(-u).
    const double sign = r.o == 1 ? 1.0 : -1.0;
    const LogTerm term = LogLink(link, sign * u, clamp);
    out.value += r.count * term.value;
    out.clamps += term.clamped ? 1 : 0;
    if (want_gradient && term.slope != 0.0) {
      kernels::axpy(r.count * sign * term.slope, r.delta_phi, out.gradient);
    }
  }
  return out;
}

std::vector<WeightedRecord> AsWeighted(const PreferenceDataset& data) {
  std::vector<WeightedRecord> out;
  for (const PreferenceRecord& r : data.records()) {
    if (r.z == 1) out.push_back({r.delta_phi, r.o, 1.0});
  }
  return out;
}

void CheckTheta(std::span<const double> theta, const PreferenceDataset& data) {
  if (theta.size() != static_cast<std::size_t>(data.dim())) {
    throw std::invalid_argument("theta dimension does not match the dataset");
  }
}

double Norm(std::span<const double> x) { return std::sqrt(kernels::dot(x, x)); }

}  // namespace

void PreferenceDataset::add(PreferenceRecord record) {
  if (record.delta_phi.size() != static_cast<std::size_t>(dim_)) {
    throw std::invalid_argument("preference record has the wrong feature dimension");
  }
  if ((record.o != 0 && record.o != 1) || (record.z != 0 && record.z != 1)) {
    throw std::invalid_argument("preference record flags must be 0 or 1");
  }
  queried_ += record.z;
  records_.push_back(std::move(record));
}

void MleConfig::validate() const {
  if (!(ball_radius > 0.0)) throw std::invalid_argument("MLE ball radius must be positive");
  if (step_size && !(*step_size > 0.0)) throw std::invalid_argument("MLE step must be positive");
  if (max_iterations < 1) throw std::invalid_argument("MLE needs at least one iteration");
  if (!(gradient_tolerance > 0.0)) throw std::invalid_argument("MLE tolerance must be positive");
}

double log_likelihood(std::span<const double> theta, const PreferenceDataset& data,
                      const LinkFunction& link) {
  CheckTheta(theta, data);
  return Evaluate(theta, AsWeighted(data), link, /*clamp=*/false, false).value;
}

Vector log_likelihood_gradient(std::span<const double> theta, const PreferenceDataset& data,
                               const LinkFunction& link) {
  CheckTheta(theta, data);
  return Evaluate(theta, AsWeighted(data), link, /*clamp=*/false, true).gradient;
}

void project_to_ball(std::span<double> x, double radius) {
  const double norm = Norm(x);
  if (norm > radius) {
    const double shrink = radius / norm;
    for (double& v : x) v *= shrink;
  }
}

MleResult mle_fit(const PreferenceDataset& data, const LinkFunction& link,
                  const MleConfig& config, std::span<const double> initial) {
  config.validate();
  MleResult result;
  result.theta.assign(data.dim(), 0.0);
  if (!initial.empty()) {
    CheckTheta(initial, data);
    result.theta.assign(initial.begin(), initial.end());
    project_to_ball(result.theta, config.ball_radius);
  }
  const std::vector<WeightedRecord> records = Compact(data);
  if (records.empty()) {
    result.converged = true;
    return result;
  }

  const double base_step = config.step_size.value_or(0.1 / std::sqrt(1.0 + data.queried()));
  double step = base_step;
  Evaluation current = Evaluate(result.theta, records, link, true, true);
  result.clamp_warnings += current.clamps;
  Vector candidate(result.theta.size());

  for (int iter = 0; iter < config.max_iterations; ++iter) {
    result.iterations = iter + 1;
    bool accepted = false;
    for (int halvings = 0; halvings < 60 && !accepted; ++halvings) {
      candidate = result.theta;
      kernels::axpy(step, current.gradient, candidate);
      project_to_ball(candidate, config.ball_radius);
      double moved_sq = 0.0;
      for (std::size_t i = 0; i < candidate.size(); ++i) {
        const double delta = candidate[i] - result.theta[i];
        moved_sq += delta * delta;
      }
      if (std::sqrt(moved_sq) / step <= config.gradient_tolerance) {
        result.converged = true;
        break;
      }
      Evaluation next = Evaluate(candidate, records, link, true, true);
      if (!std::isfinite(next.value)) {
        std::ostringstream msg;
        msg << "MLE objective became non-finite at iteration " << iter
            << " (||theta|| = " << Norm(candidate) << ", step = " << step << ")";
        throw NumericalError(msg.str());
      }
      if (next.value >= current.value) {
        result.theta.swap(candidate);
        result.clamp_warnings += next.clamps;
        current = std::move(next);
        accepted = true;
        // A step taken without backtracking may grow back toward the base
        // step, so one early cut does not stall the ascent.
        if (halvings == 0) step = std::min(base_step, 2.0 * step);
      } else {
        step *= 0.5;
      }
    }
    // Either converged, or no step size improves the objective: we are at
    // the optimum to machine precision.
    if (!accepted) {
      result.converged = true;
      break;
    }
  }
  result.log_likelihood = current.value;
  return result;
}

}  // namespace prefrl
