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
// Experiment configuration: one JSON document with named sections. The
// defaults double as the schema; unknown keys and type mismatches are
// rejected before any work starts.

#ifndef FEDSYNTH_EXPERIMENT_CONFIG_H_
#define FEDSYNTH_EXPERIMENT_CONFIG_H_

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "fedsynth/fl_dp.h"
#include "fedsynth/llm_backend.h"
#include "fedsynth/nwp_model.h"
#include "fedsynth/pretrain.h"
#include "fedsynth/privacy_accounting.h"
#include "fedsynth/refine.h"
#include "json.hpp"

namespace fedsynth {

struct BackendSection {
  std::string kind = "mock";  // mock | recorded | remote
  MockProfile mock;
  std::string fixture;        // recorded
  RemoteConfig remote;        // auth_value comes from the environment
  std::string auth_env = "FEDSYNTH_API_KEY";
};

struct SynthesisSection {
  std::string mode = "chat";  // chat | raw | private
  int64_t max_assignments = 100;
  int max_receivers = 2;
  int max_topics = 2;
  int64_t raw_count = 4000;
  double transform_fraction = 0.2;
  // Simulated private users: a differently seeded, jittered chat profile.
  uint64_t private_seed = 7919;
  double private_jitter = 0.3;
  int64_t private_assignments = 300;
};

struct PartitionSection {
  int num_clients = 100;
  int holdout_clients = 30;
  double holdout_fraction = 0.25;  // of conversations
  PartitionMode mode = PartitionMode::kSkewed;
};

struct ExperimentConfig {
  uint64_t seed = 1;
  BackendSection backend;
  SamplingParams sampling;
  SynthesisSection synthesis;
  ModelConfig model;
  PretrainOptions pretrain;
  RoundConfig fl;
  int eval_every = 10;
  int checkpoint_every = 0;
  PartitionSection partition;
  EvalConfig eval;
  PrivacySpec privacy;
  std::optional<double> privacy_rho;  // account a given rho instead of a spec
  RefineThresholds refine;
  std::vector<double> refine_sweep;
  // Percentile cutoffs tried by the end-to-end experiment; the best one on
  // a validation half of the holdout users is kept.
  std::vector<double> refine_percentile_sweep;

  // Canonical merged document; hashed into every manifest.
  nlohmann::json resolved;

  static nlohmann::json Defaults();
  static absl::StatusOr<ExperimentConfig> FromJson(const nlohmann::json& user);
  // Reads `path` (empty: defaults only) and applies "a.b=value" overrides.
  // Values parse as JSON when they can, otherwise as strings.
  static absl::StatusOr<ExperimentConfig> Load(const std::string& path,
                                               const std::vector<std::string>& overrides);

  std::string Hash() const;
};

// Applies `patch` onto `base`, rejecting keys absent from `base` and values
// whose JSON type differs (integers may not replace floats' integer slots
// with fractions; null slots accept numbers).
absl::Status MergeStrict(nlohmann::json& base, const nlohmann::json& patch,
                         const std::string& path = "");

absl::StatusOr<std::unique_ptr<CompletionBackend>> MakeBackend(const BackendSection& section);

}  // namespace fedsynth

#endif  // FEDSYNTH_EXPERIMENT_CONFIG_H_
