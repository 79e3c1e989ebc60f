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
#include "fedsynth/refine.h"

#include <algorithm>
#include <cmath>

#include "fedsynth/parallel.h"

namespace fedsynth {

absl::Status RefineThresholds::Validate() const {
  if (!(max_oov >= 0 && max_oov <= 1)) return absl::InvalidArgumentError("max_oov outside [0,1]");
  if (!(fine_percentile >= 0 && fine_percentile <= 100)) {
    return absl::InvalidArgumentError("fine_percentile outside [0,100]");
  }
  if (min_fine_score && !std::isfinite(*min_fine_score)) {
    return absl::InvalidArgumentError("min_fine_score must be finite");
  }
  return absl::OkStatus();
}

absl::StatusOr<RefineScores> ScoreExample(const ModelParameters& pre,
                                          const ModelParameters& fine,
                                          const Vocabulary& vocab, const Example& ex) {
  const int v = static_cast<int>(vocab.size());
  if (pre.config().vocab_size != v || fine.config().vocab_size != v) {
    return absl::InvalidArgumentError("refine models and vocabulary disagree on size");
  }
  RefineScores s;
  const TokenizedExample tok = Tokenize(ex.text(), vocab);
  if (tok.ids.size() < 2) {
    s.scored = false;
    s.reason = "too_short";
    s.oov = tok.ids.empty() ? 0.0 : static_cast<double>(tok.oov_count) / tok.ids.size();
    return s;
  }
  s.oov = static_cast<double>(tok.oov_count) / static_cast<double>(tok.ids.size());
  auto pre_ll = AvgLogLikelihood(pre, tok.ids);
  if (!pre_ll.ok()) return pre_ll.status();
  auto fine_ll = AvgLogLikelihood(fine, tok.ids);
  if (!fine_ll.ok()) return fine_ll.status();
  s.pre_score = *pre_ll;
  s.fine_score = *fine_ll;
  return s;
}

bool Keep(const RefineScores& scores, const RefineThresholds& th) {
  if (!scores.scored) return false;
  if (scores.oov > th.max_oov) return false;
  if (th.min_fine_score && scores.fine_score < *th.min_fine_score) return false;
  if (th.require_fine_ge_pre && scores.fine_score < scores.pre_score) return false;
  return true;
}

std::optional<double> FineScorePercentile(std::span<const RefineScores> scores, double pct) {
  std::vector<double> v;
  for (const RefineScores& s : scores) {
    if (s.scored) v.push_back(s.fine_score);
  }
  if (v.empty()) return std::nullopt;
  std::sort(v.begin(), v.end());
  const double pos = pct / 100.0 * static_cast<double>(v.size() - 1);
  const size_t lo = static_cast<size_t>(std::floor(pos));
  const size_t hi = std::min(v.size() - 1, lo + 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

absl::StatusOr<std::vector<RefineScores>> ScoreCorpus(const ModelParameters& pre,
                                                      const ModelParameters& fine,
                                                      const Vocabulary& vocab,
                                                      std::span<const Example> corpus,
                                                      int workers) {
  std::vector<absl::StatusOr<RefineScores>> slots(corpus.size());
  ParallelFor(corpus.size(), workers,
              [&](size_t i) { slots[i] = ScoreExample(pre, fine, vocab, corpus[i]); });
  std::vector<RefineScores> out;
  out.reserve(slots.size());
  for (auto& s : slots) {
    if (!s.ok()) return s.status();
    out.push_back(*std::move(s));
  }
  return out;
}

RefineResult ApplyThresholds(std::span<const Example> corpus, std::vector<RefineScores> scores,
                             RefineThresholds th) {
  RefineResult r;
  if (!th.min_fine_score) th.min_fine_score = FineScorePercentile(scores, th.fine_percentile);
  r.thresholds = th;
  for (size_t i = 0; i < corpus.size(); ++i) {
    const std::string src(SourceName(corpus[i].source()));
    RetentionStats& st = r.by_source[src];
    ++st.total;
    ++r.overall.total;
    if (!scores[i].scored) ++r.rejected_unscored[scores[i].reason];
    if (Keep(scores[i], th)) {
      ++st.kept;
      ++r.overall.kept;
      r.kept.push_back(corpus[i]);
    }
  }
  r.scores = std::move(scores);
  return r;
}

absl::StatusOr<RefineResult> FilterCorpus(const ModelParameters& pre,
                                          const ModelParameters& fine,
                                          const Vocabulary& vocab,
                                          std::span<const Example> corpus,
                                          const RefineThresholds& th, int workers) {
  if (absl::Status s = th.Validate(); !s.ok()) return s;
  auto scores = ScoreCorpus(pre, fine, vocab, corpus, workers);
  if (!scores.ok()) return scores.status();
  return ApplyThresholds(corpus, *std::move(scores), th);
}

absl::StatusOr<std::vector<RefineResult>> SweepFineThreshold(
    const ModelParameters& pre, const ModelParameters& fine, const Vocabulary& vocab,
    std::span<const Example> corpus, const RefineThresholds& base,
    std::span<const double> cutoffs, int workers) {
  if (absl::Status s = base.Validate(); !s.ok()) return s;
  auto scores = ScoreCorpus(pre, fine, vocab, corpus, workers);
  if (!scores.ok()) return scores.status();
  std::vector<RefineResult> out;
  for (double c : cutoffs) {
    RefineThresholds th = base;
    th.min_fine_score = c;
    out.push_back(ApplyThresholds(corpus, *scores, th));
  }
  return out;
}

nlohmann::json RefineResult::StatsJson() const {
  auto stats = [](const RetentionStats& s) {
    return nlohmann::json{{"kept", s.kept}, {"total", s.total}, {"fraction", s.Fraction()}};
  };
  nlohmann::json j;
  j["overall"] = stats(overall);
  for (const auto& [src, s] : by_source) j["by_source"][src] = stats(s);
  j["thresholds"] = {{"max_oov", thresholds.max_oov},
                     {"fine_percentile", thresholds.fine_percentile},
                     {"require_fine_ge_pre", thresholds.require_fine_ge_pre},
                     {"score_scale", "mean natural-log likelihood per token"}};
  if (thresholds.min_fine_score) j["thresholds"]["min_fine_score"] = *thresholds.min_fine_score;
  j["rejected_unscored"] = rejected_unscored;
  return j;
}

}  // namespace fedsynth
