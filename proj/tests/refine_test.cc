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

#include <cmath>

#include "gtest/gtest.h"
#include "test_support.h"

namespace fedsynth {
namespace {

TEST(KeepTest, InclusiveBoundaries) {
  RefineThresholds th{.max_oov = 0.25, .min_fine_score = -2.0, .require_fine_ge_pre = true};
  RefineScores s{.oov = 0.25, .pre_score = -2.0, .fine_score = -2.0};
  EXPECT_TRUE(Keep(s, th));
  s.oov = std::nextafter(0.25, 1.0);
  EXPECT_FALSE(Keep(s, th));
  s.oov = 0.0;
  s.fine_score = std::nextafter(-2.0, -3.0);
  s.pre_score = -3.0;
  EXPECT_FALSE(Keep(s, th));
  s.fine_score = -1.0;
  s.pre_score = std::nextafter(-1.0, 0.0);
  EXPECT_FALSE(Keep(s, th));
  th.require_fine_ge_pre = false;
  EXPECT_TRUE(Keep(s, th));
  th.min_fine_score.reset();
  s.fine_score = -100.0;
  EXPECT_TRUE(Keep(s, th));
  s.scored = false;
  EXPECT_FALSE(Keep(s, th));
}

TEST(ThresholdsTest, Validate) {
  EXPECT_TRUE(RefineThresholds{}.Validate().ok());
  EXPECT_FALSE((RefineThresholds{.max_oov = 1.5}).Validate().ok());
  EXPECT_FALSE((RefineThresholds{.fine_percentile = 120}).Validate().ok());
}

TEST(PercentileTest, LinearInterpolation) {
  std::vector<RefineScores> s;
  for (double v : {-4.0, -1.0, -3.0, -2.0}) s.push_back({.fine_score = v});
  s.push_back({.fine_score = -50.0, .scored = false, .reason = "too_short"});
  EXPECT_DOUBLE_EQ(*FineScorePercentile(s, 0), -4.0);
  EXPECT_DOUBLE_EQ(*FineScorePercentile(s, 100), -1.0);
  EXPECT_DOUBLE_EQ(*FineScorePercentile(s, 50), -2.5);
  EXPECT_DOUBLE_EQ(*FineScorePercentile(s, 40), -2.8);  // -3 + 0.2 * (-2 - -3)
  EXPECT_FALSE(FineScorePercentile({}, 50).has_value());
}

// Vocabulary of 6 words; "pre" is uniform, "fine" strongly prefers "b" after "a".
struct Models {
  Vocabulary vocab = *Vocabulary::Create({"<oov>", "a", "b", "c", "d", "e"}, 0);
  ModelConfig config{.vocab_size = 6, .embed_dim = 3, .hidden_dim = 4, .max_seq_len = 16};
  ModelParameters pre = ModelParameters::Zeros(config);
  ModelParameters fine = ModelParameters::Zeros(config);
  Models() {
    // Output bias favouring "b" makes every "b" target likelier under fine.
    fine.output_bias()[2] = 2.0;
    fine.output_bias()[3] = -2.0;
  }
};

Corpus MixedCorpus() {
  Corpus c;
  auto add = [&](const char* text, Source src) { c.push_back(*Example::Create(text, src)); };
  add("a b a b a b", Source::kGeneratedChat);
  add("a b b b", Source::kGeneratedChat);
  add("c c c c", Source::kFiltered);
  add("a b zz yy xx ww", Source::kFiltered);  // mostly OOV
  add("b", Source::kTransformed);             // too short
  add("b b c b", Source::kTransformed);
  add("d e d e", Source::kFiltered);
  return c;
}

TEST(ScoreTest, ScoresAndReasons) {
  Models m;
  Corpus c = MixedCorpus();
  auto s0 = ScoreExample(m.pre, m.fine, m.vocab, c[0]);
  ASSERT_TRUE(s0.ok());
  EXPECT_TRUE(s0->scored);
  EXPECT_NEAR(s0->pre_score, -std::log(6.0), 1e-12);
  EXPECT_GT(s0->fine_score, s0->pre_score);
  EXPECT_LE(s0->fine_score, 0.0);
  auto s3 = ScoreExample(m.pre, m.fine, m.vocab, c[3]);
  EXPECT_NEAR(s3->oov, 4.0 / 6.0, 1e-15);
  auto s4 = ScoreExample(m.pre, m.fine, m.vocab, c[4]);
  EXPECT_FALSE(s4->scored);
  EXPECT_EQ(s4->reason, "too_short");

  ModelParameters wrong = ModelParameters::Zeros({.vocab_size = 7});
  EXPECT_FALSE(ScoreExample(m.pre, wrong, m.vocab, c[0]).ok());
}

TEST(FilterCorpusTest, FixedThresholdsAreIdempotent) {
  Models m;
  Corpus c = MixedCorpus();
  RefineThresholds th{.max_oov = 0.6, .min_fine_score = -1.8, .require_fine_ge_pre = true};
  auto once = FilterCorpus(m.pre, m.fine, m.vocab, c, th);
  ASSERT_TRUE(once.ok()) << once.status();
  EXPECT_FALSE(once->kept.empty());
  EXPECT_LT(once->kept.size(), c.size());
  auto twice = FilterCorpus(m.pre, m.fine, m.vocab, once->kept, th);
  ASSERT_TRUE(twice.ok());
  EXPECT_EQ(twice->kept, once->kept);
  // Refinement selects; it never edits text.
  for (const Example& ex : once->kept) {
    EXPECT_NE(std::find(c.begin(), c.end(), ex), c.end());
  }
}

TEST(FilterCorpusTest, StatsPerSource) {
  Models m;
  Corpus c = MixedCorpus();
  auto r = FilterCorpus(m.pre, m.fine, m.vocab, c,
                        {.max_oov = 0.6, .min_fine_score = std::nullopt, .fine_percentile = 0});
  ASSERT_TRUE(r.ok());
  EXPECT_EQ(r->overall.total, static_cast<int64_t>(c.size()));
  int64_t total = 0, kept = 0;
  for (const auto& [src, st] : r->by_source) {
    total += st.total;
    kept += st.kept;
  }
  EXPECT_EQ(total, r->overall.total);
  EXPECT_EQ(kept, r->overall.kept);
  EXPECT_EQ(r->by_source.at("transformed").total, 2);
  EXPECT_EQ(r->rejected_unscored.at("too_short"), 1);
  // The 0th percentile resolves to the minimum scored fine score.
  ASSERT_TRUE(r->thresholds.min_fine_score.has_value());
  EXPECT_DOUBLE_EQ(*r->thresholds.min_fine_score, *FineScorePercentile(r->scores, 0));
  nlohmann::json j = r->StatsJson();
  EXPECT_EQ(j["overall"]["total"], static_cast<int64_t>(c.size()));
  EXPECT_TRUE(j["by_source"].contains("filtered"));
}

TEST(SweepTest, StricterCutoffKeepsSubset) {
  Models m;
  Corpus c = MixedCorpus();
  const std::vector<double> cutoffs = {-3.0, -1.8, -1.0};
  auto results = SweepFineThreshold(m.pre, m.fine, m.vocab, c, RefineThresholds{}, cutoffs);
  ASSERT_TRUE(results.ok());
  ASSERT_EQ(results->size(), 3u);
  for (size_t i = 1; i < results->size(); ++i) {
    EXPECT_LE((*results)[i].overall.kept, (*results)[i - 1].overall.kept);
    EXPECT_EQ(*(*results)[i].thresholds.min_fine_score, cutoffs[i]);
  }
}

}  // namespace
}  // namespace fedsynth
