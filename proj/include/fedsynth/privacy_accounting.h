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
// zCDP accounting for tree aggregation with bounded participation, and the
// standard zCDP -> (epsilon, delta) conversion. Deliberately loose: every
// participation is charged to every tree level.

#ifndef FEDSYNTH_PRIVACY_ACCOUNTING_H_
#define FEDSYNTH_PRIVACY_ACCOUNTING_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "json.hpp"

namespace fedsynth {

inline constexpr char kAccountingMethod[] =
    "zCDP, tree aggregation, k*h sensitivity bound, standard conversion "
    "eps = rho + 2*sqrt(rho*ln(1/delta)) (not PLD)";

struct PrivacySpec {
  int64_t total_rounds = 0;
  int64_t max_participations = 1;
  int64_t min_separation = 1;
  double noise_multiplier = 0.0;
  double target_delta = 1e-10;
};

// ceil(log2(T)) + 1 for T >= 1.
int TreeHeight(int64_t total_rounds);

// Checks ranges and k <= ceil(T / s).
absl::Status CheckFeasible(const PrivacySpec& spec);

// rho = k * h / (2 z^2). z == 0 gives +inf.
absl::StatusOr<double> ZcdpTree(const PrivacySpec& spec);

// delta must lie in (0, 1); rho >= 0 (inf maps to inf).
absl::StatusOr<double> ZcdpToEpsilon(double rho, double delta);

// Observed participation counts (one entry per client) never exceed k.
absl::Status AuditParticipation(const PrivacySpec& spec, const std::vector<int64_t>& counts);

struct PrivacyReport {
  PrivacySpec spec;
  bool from_spec = true;  // false when rho was given directly
  int tree_height = 0;
  double rho = 0.0;
  double epsilon = 0.0;
  double delta = 0.0;
  std::string method = kAccountingMethod;

  nlohmann::json ToJson() const;
  // Human-readable statement: setting, unit of privacy, adjacency, rho,
  // (epsilon, delta) and the method label.
  std::string Statement() const;
};

absl::StatusOr<PrivacyReport> Account(const PrivacySpec& spec);
absl::StatusOr<PrivacyReport> AccountRho(double rho, double delta);

}  // namespace fedsynth

#endif  // FEDSYNTH_PRIVACY_ACCOUNTING_H_
