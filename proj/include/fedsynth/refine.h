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
// Corpus refinement: score each example with a pre-trained and a privately
// fine-tuned model and keep those that are mostly in-vocabulary, score well
// under the fine-tuned model, and score no worse than under the pre-trained
// one. Only model outputs are consumed; no client data is touched.

#ifndef FEDSYNTH_REFINE_H_
#define FEDSYNTH_REFINE_H_

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "fedsynth/corpus.h"
#include "fedsynth/nwp_model.h"
#include "json.hpp"

namespace fedsynth {

// Scores are mean natural-log likelihoods per predicted token (<= 0).
struct RefineScores {
  double oov = 0.0;
  double pre_score = 0.0;
  double fine_score = 0.0;
  bool scored = true;      // false: rejected before scoring
  std::string reason;      // set when !scored
};

struct RefineThresholds {
  double max_oov = 0.6;
  // Absolute cutoff on fine_score. When unset it is resolved from the
  // corpus as the `fine_percentile` percentile of fine scores.
  std::optional<double> min_fine_score;
  double fine_percentile = 40.0;
  bool require_fine_ge_pre = true;

  absl::Status Validate() const;
};

// Models must both match the vocabulary size. Examples with fewer than two
// tokens come back with scored == false and reason "too_short".
absl::StatusOr<RefineScores> ScoreExample(const ModelParameters& pre,
                                          const ModelParameters& fine,
                                          const Vocabulary& vocab, const Example& ex);

// All three predicates, boundaries inclusive. An unset min_fine_score
// imposes no cutoff. Unscored examples are never kept.
bool Keep(const RefineScores& scores, const RefineThresholds& th);

// Linear-interpolated percentile (0..100) of the fine scores of scored
// examples; nullopt when nothing was scored.
std::optional<double> FineScorePercentile(std::span<const RefineScores> scores, double pct);

struct RetentionStats {
  int64_t kept = 0;
  int64_t total = 0;
  double Fraction() const {
    return total == 0 ? 0.0 : static_cast<double>(kept) / static_cast<double>(total);
  }
};

struct RefineResult {
  Corpus kept;
  std::vector<RefineScores> scores;  // aligned with the input corpus
  RefineThresholds thresholds;       // with min_fine_score resolved
  RetentionStats overall;
  std::map<std::string, RetentionStats> by_source;
  std::map<std::string, int64_t> rejected_unscored;  // reason -> count

  nlohmann::json StatsJson() const;
};

absl::StatusOr<std::vector<RefineScores>> ScoreCorpus(const ModelParameters& pre,
                                                      const ModelParameters& fine,
                                                      const Vocabulary& vocab,
                                                      std::span<const Example> corpus,
                                                      int workers = 1);

// Applies Keep with thresholds resolved against `scores`.
RefineResult ApplyThresholds(std::span<const Example> corpus,
                             std::vector<RefineScores> scores, RefineThresholds th);

absl::StatusOr<RefineResult> FilterCorpus(const ModelParameters& pre,
                                          const ModelParameters& fine,
                                          const Vocabulary& vocab,
                                          std::span<const Example> corpus,
                                          const RefineThresholds& th, int workers = 1);

// One result per cutoff, sharing one scoring pass.
absl::StatusOr<std::vector<RefineResult>> SweepFineThreshold(
    const ModelParameters& pre, const ModelParameters& fine, const Vocabulary& vocab,
    std::span<const Example> corpus, const RefineThresholds& base,
    std::span<const double> cutoffs, int workers = 1);

}  // namespace fedsynth

#endif  // FEDSYNTH_REFINE_H_
