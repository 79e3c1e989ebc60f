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
#include "fedsynth/corpus.h"

#include <string>
#include <vector>

#include "gtest/gtest.h"
#include "oracles.h"
#include "test_support.h"

namespace fedsynth {
namespace {

using ::fedsynth::testing::ScratchDir;

TEST(ExampleTest, TrimsAndRejectsEmpty) {
  auto ex = Example::Create("  hi there \n", Source::kRaw);
  ASSERT_TRUE(ex.ok());
  EXPECT_EQ(ex->text(), "hi there");
  EXPECT_FALSE(Example::Create(" \t\n", Source::kRaw).ok());
}

TEST(SourceTest, NamesRoundTrip) {
  for (Source s : {Source::kFiltered, Source::kGeneratedChat, Source::kTransformed,
                   Source::kRaw, Source::kPrivateSim}) {
    auto parsed = ParseSource(SourceName(s));
    ASSERT_TRUE(parsed.ok());
    EXPECT_EQ(*parsed, s);
  }
  EXPECT_FALSE(ParseSource("nope").ok());
}

TEST(SplitWordsTest, LettersDigitsPunctuation) {
  EXPECT_EQ(SplitWords("Hello, World!"),
            (std::vector<std::string>{"hello", ",", "world", "!"}));
  EXPECT_EQ(SplitWords("I can't go at 10pm"),
            (std::vector<std::string>{"i", "can't", "go", "at", "10", "pm"}));
  EXPECT_TRUE(SplitWords("   ").empty());
}

TEST(TokenizeTest, OovLastVocabulary) {
  // OOV need not be id 0 for an in-memory vocabulary.
  auto vocab = Vocabulary::Create({"hello", "world", "<oov>"}, 2);
  ASSERT_TRUE(vocab.ok());
  TokenizedExample t = Tokenize("hello there world", *vocab);
  EXPECT_EQ(t.ids, (std::vector<TokenId>{0, 2, 1}));
  EXPECT_EQ(t.oov_count, 1);
  auto rate = OovRate(t);
  ASSERT_TRUE(rate.ok());
  EXPECT_DOUBLE_EQ(*rate, 1.0 / 3.0);
  EXPECT_FALSE(OovRate(TokenizedExample{}).ok());
}

TEST(VocabularyTest, RejectsDuplicatesAndBadOov) {
  EXPECT_FALSE(Vocabulary::Create({"a", "a", "<oov>"}, 2).ok());
  EXPECT_FALSE(Vocabulary::Create({"a", "<oov>"}, 5).ok());
}

TEST(VocabularyTest, BuildRanksByFrequencyThenLexicographic) {
  Corpus c;
  c.push_back(*Example::Create("b a c a b d", Source::kRaw));
  auto vocab = Vocabulary::Build(c, 4);
  ASSERT_TRUE(vocab.ok());
  EXPECT_EQ(vocab->words(), (std::vector<std::string>{"<oov>", "a", "b", "c"}));
  EXPECT_EQ(vocab->oov_id(), 0);
  EXPECT_EQ(vocab->Lookup("d"), 0);
}

TEST(VocabularyTest, SaveLoadRoundTrip) {
  ScratchDir dir("vocab");
  Corpus c;
  c.push_back(*Example::Create("the cat sat on the mat", Source::kRaw));
  auto vocab = Vocabulary::Build(c, 10);
  ASSERT_TRUE(vocab.ok());
  FS_ASSERT_OK(vocab->Save(dir.File("v.txt")));
  auto loaded = Vocabulary::Load(dir.File("v.txt"));
  ASSERT_TRUE(loaded.ok());
  EXPECT_EQ(loaded->words(), vocab->words());
  EXPECT_EQ(loaded->oov_id(), 0);
}

TEST(TurnsTest, ParsesMarkersAndContinuations) {
  const std::string chat =
      "**Me:** Hey mom, I'm having fun!\n**Mom:** Great.\nSee you soon.\n";
  std::vector<Turn> turns = ParseTurns(chat);
  ASSERT_EQ(turns.size(), 2u);
  EXPECT_EQ(turns[0].speaker, "Me");
  EXPECT_EQ(turns[0].text, "Hey mom, I'm having fun!");
  EXPECT_EQ(turns[1].speaker, "Mom");
  EXPECT_EQ(turns[1].text, "Great.\nSee you soon.");

  std::vector<Example> ex = SplitTurns(chat, Source::kGeneratedChat, {{"conv_id", "c1"}});
  ASSERT_EQ(ex.size(), 2u);
  EXPECT_EQ(ex[1].meta().at("conv_id"), "c1");

  std::vector<Example> plain = SplitTurns("no markers here");
  ASSERT_EQ(plain.size(), 1u);
  EXPECT_EQ(plain[0].meta().at("no_turn_markers"), "1");
}

TEST(SentencesTest, SplitsOnTerminalPunctuation) {
  std::vector<Example> s = SplitSentences("One. Two! Three? Four");
  ASSERT_EQ(s.size(), 4u);
  EXPECT_EQ(s[0].text(), "One.");
  EXPECT_EQ(s[3].text(), "Four");
}

TEST(CorpusIoTest, JsonlRoundTrip) {
  ScratchDir dir("corpus");
  Corpus c;
  c.push_back(*Example::Create("first line", Source::kFiltered, {{"k", "v"}}));
  c.push_back(*Example::Create("second \"quoted\" line", Source::kGeneratedChat));
  FS_ASSERT_OK(WriteCorpus(dir.File("c.jsonl"), c));
  auto back = ReadCorpus(dir.File("c.jsonl"));
  ASSERT_TRUE(back.ok());
  EXPECT_EQ(*back, c);
}

TEST(CorpusMetricsTest, MatchBruteForceOnRandomCorpora) {
  for (uint64_t seed = 0; seed < 100; ++seed) {
    testing::RandomCorpusCase rc = testing::MakeRandomCorpus(seed);
    Vocabulary vocab = testing::VocabularyFor(rc, seed);
    EXPECT_EQ(VocabCoverage(rc.corpus, vocab), testing::BruteForceCoverage(rc)) << "seed " << seed;
    for (size_t i = 0; i < rc.corpus.size(); ++i) {
      auto rate = OovRate(Tokenize(rc.corpus[i].text(), vocab));
      ASSERT_TRUE(rate.ok());
      EXPECT_EQ(*rate, testing::BruteForceOovRate(rc, i)) << "seed " << seed << " example " << i;
    }
  }
}

TEST(CorpusMetricsTest, EmptyCorpusCoversNothing) {
  auto vocab = Vocabulary::Create({"<oov>", "a"}, 0);
  EXPECT_EQ(VocabCoverage({}, *vocab), 0.0);
}

}  // namespace
}  // namespace fedsynth
