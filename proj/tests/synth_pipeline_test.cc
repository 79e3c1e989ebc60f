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
#include "fedsynth/synth_pipeline.h"

#include <functional>
#include <set>

#include "fedsynth/hash.h"
#include "gtest/gtest.h"
#include "golden_text.h"

namespace fedsynth {
namespace {

class FakeBackend : public CompletionBackend {
 public:
  using Fn = std::function<absl::StatusOr<CompletionResponse>(const std::string&)>;
  explicit FakeBackend(Fn fn) : fn_(std::move(fn)) {}
  absl::StatusOr<CompletionResponse> Complete(const CompletionRequest& r) const override {
    ++calls_;
    return fn_(r.prompt);
  }
  std::string Name() const override { return "fake"; }
  int calls() const { return calls_; }

 private:
  Fn fn_;
  mutable std::atomic<int> calls_{0};
};

FakeBackend Always(std::string text) {
  return FakeBackend([text](const std::string&) -> absl::StatusOr<CompletionResponse> {
    return CompletionResponse{text, FinishReason::kStop};
  });
}

VariableAssignment Full() {
  VariableAssignment a = VariableSets::Default().At(0);
  a.receiver = "mom";
  a.topic = "dinner plans";
  return a;
}

TEST(ParseBinaryScoreTest, FirstStandaloneDigit) {
  EXPECT_EQ(ParseBinaryScore("1"), 1);
  EXPECT_EQ(ParseBinaryScore("Score: 0"), 0);
  EXPECT_EQ(ParseBinaryScore("The score is 1."), 1);
  EXPECT_EQ(ParseBinaryScore("10 points, so 0"), 0);
  EXPECT_EQ(ParseBinaryScore("a1 b0c"), std::nullopt);
  EXPECT_EQ(ParseBinaryScore("maybe"), std::nullopt);
}

TEST(ParseListTest, MarkersAndDedup) {
  EXPECT_EQ(ParseList("1. Mom\n2. Mom\n3. Dad"), (std::vector<std::string>{"Mom", "Dad"}));
  EXPECT_EQ(ParseList("* **Boss**\n- \"Sister\"\n\xE2\x80\xA2 friend\n4) mom\n\n"),
            (std::vector<std::string>{"Boss", "Sister", "friend", "mom"}));
  EXPECT_TRUE(ParseList("").empty());
}

TEST(DedupTest, IdempotentAndOrderPreserving) {
  std::vector<std::string> in = {"b", "A", "a", "c", "B", "d"};
  std::vector<std::string> once = DedupPreserveOrder(in);
  EXPECT_EQ(once, (std::vector<std::string>{"b", "A", "c", "d"}));
  EXPECT_EQ(DedupPreserveOrder(once), once);
}

TEST(FilterExampleTest, RecordedSnippetsReplay) {
  std::map<std::string, std::string> recorded;
  std::vector<Example> positives, negatives;
  for (std::string_view s : testing::kPhoneTopics) {
    positives.push_back(*Example::Create(s, Source::kRaw));
    recorded[Sha256Hex(*RenderPrompt(PromptKind::kFilter, positives.back()))] = "1";
  }
  for (std::string_view s : testing::kNonPhoneTopics) {
    negatives.push_back(*Example::Create(s, Source::kRaw));
    recorded[Sha256Hex(*RenderPrompt(PromptKind::kFilter, negatives.back()))] = "Score: 0";
  }
  RecordedBackend backend(recorded);
  for (const Example& ex : positives) {
    auto keep = FilterExample(backend, ex, {});
    ASSERT_TRUE(keep.ok()) << keep.status();
    EXPECT_TRUE(*keep) << ex.text();
  }
  for (const Example& ex : negatives) {
    auto keep = FilterExample(backend, ex, {});
    ASSERT_TRUE(keep.ok()) << keep.status();
    EXPECT_FALSE(*keep) << ex.text();
  }
}

TEST(FilterExampleTest, UnparseableIsCountedNotKept) {
  FakeBackend backend([](const std::string& prompt) -> absl::StatusOr<CompletionResponse> {
    if (prompt.find("bad") != std::string::npos) return CompletionResponse{"hmm", {}};
    if (prompt.find("down") != std::string::npos) return absl::UnavailableError("down");
    return CompletionResponse{prompt.find("yes") != std::string::npos ? "1" : "0", {}};
  });
  Corpus c;
  for (const char* t : {"yes one", "no two", "bad three", "down four", "yes five"}) {
    c.push_back(*Example::Create(t, Source::kRaw));
  }
  SynthResult r = RunFilter(backend, c, {}, 3);
  EXPECT_EQ(r.stats.filter.jobs, 5);
  EXPECT_EQ(r.stats.filter.kept, 2);
  EXPECT_EQ(r.stats.filter.dropped, 1);
  EXPECT_EQ(r.stats.filter.unparseable, 1);
  EXPECT_EQ(r.stats.filter.backend_errors, 1);
  EXPECT_TRUE(r.stats.filter.Balanced());
  ASSERT_EQ(r.corpus.size(), 2u);
  EXPECT_EQ(r.corpus[0].text(), "yes one");
  EXPECT_EQ(r.corpus[1].text(), "yes five");
  EXPECT_EQ(r.corpus[0].source(), Source::kFiltered);
}

TEST(GenerateTest, ChainOrderEnforced) {
  FakeBackend backend = Always("1. a\n2. b\n3. c");
  VariableAssignment a = VariableSets::Default().At(0);
  EXPECT_EQ(GenerateTopics(backend, a, {}).status().code(),
            absl::StatusCode::kFailedPrecondition);
  a.receiver = "mom";
  EXPECT_FALSE(GenerateConversation(backend, a, {}).ok());
  EXPECT_EQ(backend.calls(), 0);
}

TEST(GenerateTest, EmptyListIsAnError) {
  FakeBackend backend = Always("");
  EXPECT_FALSE(GenerateReceivers(backend, VariableSets::Default().At(0), {}).ok());
}

TEST(GenerateTest, QuotedConversationHasEightTurns) {
  FakeBackend backend = Always(std::string(testing::kVacationChat));
  auto ex = GenerateConversation(backend, Full(), {});
  ASSERT_TRUE(ex.ok()) << ex.status();
  EXPECT_EQ(ex->source(), Source::kGeneratedChat);
  EXPECT_EQ(ParseTurns(ex->text()).size(), 8u);
  EXPECT_EQ(ex->meta().at("receiver"), "mom");
  EXPECT_EQ(ex->meta().at("topic"), "dinner plans");
  EXPECT_EQ(ex->meta().at("gender"), Full().gender);
}

TEST(GenerateTest, SingleLineRejected) {
  FakeBackend backend = Always("Sure, here is a message for you.");
  auto ex = GenerateConversation(backend, Full(), {});
  ASSERT_FALSE(ex.ok());
  EXPECT_EQ(ex.status().code(), absl::StatusCode::kDataLoss);
}

TEST(TransformTest, QuotedArticleConversation) {
  FakeBackend backend = Always(std::string(testing::kDogChat));
  auto article = Example::Create(testing::kDogArticle, Source::kFiltered, {{"id", "doc-7"}});
  auto ex = TransformExample(backend, *article, {});
  ASSERT_TRUE(ex.ok()) << ex.status();
  EXPECT_EQ(ex->source(), Source::kTransformed);
  // The quoted output alternates Me/You and ends on Me.
  EXPECT_EQ(ParseTurns(ex->text()).size(), 11u);
  EXPECT_EQ(ex->meta().at("source_id"), "doc-7");
}

TEST(TransformTest, RequiresFilteredSource) {
  FakeBackend backend = Always(std::string(testing::kDogChat));
  auto article = Example::Create(testing::kDogArticle, Source::kRaw);
  EXPECT_FALSE(TransformExample(backend, *article, {}).ok());
  EXPECT_EQ(backend.calls(), 0);
}

TEST(TransformTest, SelectsRoundedFraction) {
  for (size_t n : {0u, 1u, 7u, 100u, 1001u}) {
    std::vector<size_t> idx = SelectForTransform(n, 0.2, 5);
    EXPECT_EQ(idx.size(), static_cast<size_t>(std::llround(0.2 * n)));
    EXPECT_TRUE(std::is_sorted(idx.begin(), idx.end()));
    EXPECT_EQ(std::set<size_t>(idx.begin(), idx.end()).size(), idx.size());
    for (size_t i : idx) EXPECT_LT(i, n);
  }
  EXPECT_EQ(SelectForTransform(100, 0.2, 5), SelectForTransform(100, 0.2, 5));
}

TEST(GenerateChatsTest, MockChatAcceptsEveryConversation) {
  auto backend = MockProfileBackend(MockStyle::kChatLike, 0.5);
  GenerationOptions opt;
  opt.max_assignments = 250;
  opt.max_receivers = 2;
  opt.max_topics = 2;
  opt.seed = 3;
  opt.workers = 4;
  SynthResult r = GenerateChats(*backend, VariableSets::Default(), opt);
  EXPECT_EQ(r.stats.conversations.jobs, 1000);
  EXPECT_EQ(r.stats.conversations.kept, 1000);
  EXPECT_EQ(r.corpus.size(), 1000u);
  for (const StageStats& s : {r.stats.receivers, r.stats.topics, r.stats.conversations}) {
    EXPECT_TRUE(s.Balanced());
  }
}

TEST(GenerateChatsTest, WorkerCountDoesNotChangeOutput) {
  auto backend = MockProfileBackend(MockStyle::kChatLike, 0.5);
  GenerationOptions opt;
  opt.max_assignments = 30;
  opt.seed = 11;
  opt.workers = 1;
  SynthResult a = GenerateChats(*backend, VariableSets::Default(), opt);
  opt.workers = 6;
  SynthResult b = GenerateChats(*backend, VariableSets::Default(), opt);
  EXPECT_EQ(a.corpus, b.corpus);
  EXPECT_EQ(a.stats.ToJson(), b.stats.ToJson());
}

TEST(CombineTest, ConcatenatesAndRatios) {
  Corpus a, b;
  for (int i = 0; i < 4; ++i) a.push_back(*Example::Create("a" + std::to_string(i), Source::kFiltered));
  for (int i = 0; i < 3; ++i) b.push_back(*Example::Create("b" + std::to_string(i), Source::kGeneratedChat));
  std::vector<Corpus> one = {a};
  EXPECT_EQ(Combine(one), a);
  std::vector<Corpus> two = {a, b};
  Corpus ab = Combine(two);
  EXPECT_EQ(ab.size(), a.size() + b.size());
  EXPECT_EQ(ab[4].source(), Source::kGeneratedChat);
  const std::vector<double> ratios = {0.5, 1.0};
  EXPECT_EQ(Combine(two, ratios).size(), 2u + 3u);
}

TEST(PreprocessTest, TurnsForChatSentencesOtherwise) {
  Corpus c;
  c.push_back(*Example::Create("**Me:** Hi there. How are you?\n**You:** Fine.",
                               Source::kGeneratedChat, {{"id", "chat-0"}}));
  c.push_back(*Example::Create("First sentence. Second one!", Source::kFiltered, {{"id", "doc-0"}}));
  Corpus out = PreprocessForTraining(c);
  ASSERT_EQ(out.size(), 4u);
  EXPECT_EQ(out[0].text(), "Hi there. How are you?");
  EXPECT_EQ(out[1].text(), "Fine.");
  EXPECT_EQ(out[2].text(), "First sentence.");
  EXPECT_EQ(out[3].source(), Source::kFiltered);
}

}  // namespace
}  // namespace fedsynth
