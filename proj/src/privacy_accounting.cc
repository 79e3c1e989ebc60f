/*
 * Copyright 2026 The FedSynth Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include "fedsynth/privacy_accounting.h"

#include <bit>
#include <cmath>
#include <limits>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"

namespace fedsynth {

int TreeHeight(int64_t total_rounds) {
  if (total_rounds <= 1) return 1;
  return static_cast<int>(std::bit_width(static_cast<uint64_t>(total_rounds - 1))) + 1;
}

absl::Status CheckFeasible(const PrivacySpec& spec) {
  if (spec.total_rounds < 1) return absl::InvalidArgumentError("total_rounds must be >= 1");
  if (spec.min_separation < 1) return absl::InvalidArgumentError("min_separation must be >= 1");
  if (spec.max_participations < 1) {
    return absl::InvalidArgumentError("max_participations must be >= 1");
  }
  if (!(spec.noise_multiplier >= 0)) {
    return absl::InvalidArgumentError("noise_multiplier must be >= 0");
  }
  if (!(spec.target_delta > 0 && spec.target_delta < 1)) {
    return absl::InvalidArgumentError("target_delta must lie in (0, 1)");
  }
  const int64_t limit = (spec.total_rounds + spec.min_separation - 1) / spec.min_separation;
  if (spec.max_participations > limit) {
    return absl::FailedPreconditionError(absl::StrCat(
        "infeasible: max_participations ", spec.max_participations, " > ceil(",
        spec.total_rounds, "/", spec.min_separation, ") = ", limit));
  }
  return absl::OkStatus();
}

absl::StatusOr<double> ZcdpTree(const PrivacySpec& spec) {
  if (absl::Status s = CheckFeasible(spec); !s.ok()) return s;
  if (spec.noise_multiplier == 0.0) return std::numeric_limits<double>::infinity();
  const double z = spec.noise_multiplier;
  return static_cast<double>(spec.max_participations) * TreeHeight(spec.total_rounds) /
         (2.0 * z * z);
}

absl::StatusOr<double> ZcdpToEpsilon(double rho, double delta) {
  if (!(delta > 0 && delta < 1)) return absl::InvalidArgumentError("delta must lie in (0, 1)");
  if (!(rho >= 0)) return absl::InvalidArgumentError("rho must be >= 0");
  if (std::isinf(rho)) return rho;
  return rho + 2.0 * std::sqrt(rho * std::log(1.0 / delta));
}

absl::Status AuditParticipation(const PrivacySpec& spec, const std::vector<int64_t>& counts) {
  for (size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] > spec.max_participations) {
      return absl::FailedPreconditionError(
          absl::StrCat("client ", i, " participated ", counts[i], " times, limit ",
                       spec.max_participations));
    }
  }
  return absl::OkStatus();
}

absl::StatusOr<PrivacyReport> Account(const PrivacySpec& spec) {
  auto rho = ZcdpTree(spec);
  if (!rho.ok()) return rho.status();
  auto eps = ZcdpToEpsilon(*rho, spec.target_delta);
  if (!eps.ok()) return eps.status();
  PrivacyReport r;
  r.spec = spec;
  r.tree_height = TreeHeight(spec.total_rounds);
  r.rho = *rho;
  r.epsilon = *eps;
  r.delta = spec.target_delta;
  return r;
}

absl::StatusOr<PrivacyReport> AccountRho(double rho, double delta) {
  auto eps = ZcdpToEpsilon(rho, delta);
  if (!eps.ok()) return eps.status();
  PrivacyReport r;
  r.from_spec = false;
  r.spec.target_delta = delta;
  r.rho = rho;
  r.epsilon = *eps;
  r.delta = delta;
  return r;
}

nlohmann::json PrivacyReport::ToJson() const {
  nlohmann::json j = {{"rho", rho}, {"epsilon", epsilon}, {"delta", delta}, {"method", method}};
  if (from_spec) {
    j["inputs"] = {{"total_rounds", spec.total_rounds},
                   {"max_participations", spec.max_participations},
                   {"min_separation", spec.min_separation},
                   {"noise_multiplier", spec.noise_multiplier},
                   {"tree_height", tree_height}};
  } else {
    j["inputs"] = {{"rho", rho}};
  }
  // JSON has no infinity.
  if (std::isinf(rho)) j["rho"] = "inf";
  if (std::isinf(epsilon)) j["epsilon"] = "inf";
  return j;
}

std::string PrivacyReport::Statement() const {
  std::string out;
  absl::StrAppend(&out, "Privacy statement\n");
  absl::StrAppend(&out, "  DP setting: user-level DP via tree-aggregated noisy prefix sums "
                        "of clipped client model deltas\n");
  absl::StrAppend(&out, "  Privacy unit: one client device (all of its data)\n");
  absl::StrAppend(&out, "  Adjacency: zero-out / add-remove of a single client\n");
  if (from_spec) {
    absl::StrAppend(&out, absl::StrFormat(
        "  Inputs: T=%d rounds, k=%d participations, min separation=%d, noise multiplier=%g, "
        "tree height=%d\n",
        spec.total_rounds, spec.max_participations, spec.min_separation,
        spec.noise_multiplier, tree_height));
  } else {
    absl::StrAppend(&out, "  Inputs: rho given directly\n");
  }
  absl::StrAppend(&out, absl::StrFormat("  Guarantee: rho=%.6g zCDP\n", rho));
  absl::StrAppend(&out, absl::StrFormat("  (epsilon, delta): (%.4f, %g)\n", epsilon, delta));
  absl::StrAppend(&out, "  Method: ", method, "\n");
  return out;
}

}  // namespace fedsynth
