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
// Desk-scale end-to-end reproduction: two pre-training corpora (chat-style
// synthetic conversations vs web-style documents), federated fine-tuning on
// simulated private users, accuracy-vs-round curves, and the refinement
// round trip.

#ifndef FEDSYNTH_BOX_H_
#define FEDSYNTH_BOX_H_

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "fedsynth/experiment_config.h"
#include "fedsynth/fl_dp.h"
#include "fedsynth/refine.h"
#include "json.hpp"

namespace fedsynth {

struct CurvePoint {
  int64_t round = 0;
  double chat = 0.0;
  double web = 0.0;
};

struct BoxResult {
  std::vector<CurvePoint> curve;  // full-holdout accuracy per eval round
  EvalResult chat_final;          // sampled 3-run federated eval
  EvalResult web_final;
  double round0_relative_gain = 0.0;  // chat/web - 1 at round 0
  // First eval round at which the chat run reaches the web run's final
  // accuracy; nullopt if it never does.
  std::optional<int64_t> chat_rounds_to_web_final;
  int64_t web_rounds = 0;

  // Refinement. Holdout users are split in two: cutoffs are chosen on the
  // validation half, accuracies below are on the test half.
  struct SweepPoint {
    double percentile = 0.0;
    double min_fine_score = 0.0;
    int64_t kept = 0;
    double validation_accuracy = 0.0;
  };
  std::vector<SweepPoint> refine_sweep;
  double chosen_percentile = 0.0;
  RefineResult refine;              // at the chosen cutoff
  double unrefined_accuracy = 0.0;  // mix-pretrained model
  double refined_accuracy = 0.0;    // retrained on the refined mix

  nlohmann::json Summary() const;
  std::string Figure5Csv() const;
  std::string Table3Text() const;
};

// When out_dir is non-empty, writes corpora, checkpoints, figure5.csv,
// table3.txt, refine_stats.json and summary.json there.
absl::StatusOr<BoxResult> RunBoxExperiment(const ExperimentConfig& cfg, int workers,
                                           const std::string& out_dir, std::ostream& log);

}  // namespace fedsynth

#endif  // FEDSYNTH_BOX_H_
