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
// Template grammar behind the mock completion backend. Two styles share
// function words and templates-by-role but draw content words (nouns, verbs,
// adjectives) from distinct pools whose overlap is set by vocab_skew.

#ifndef FEDSYNTH_MOCK_LANGUAGE_H_
#define FEDSYNTH_MOCK_LANGUAGE_H_

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fedsynth/llm_backend.h"
#include "fedsynth/random.h"

namespace fedsynth {

bool IsChatContentWord(std::string_view word);
bool IsWebContentWord(std::string_view word);

class MockLanguage {
 public:
  explicit MockLanguage(const MockProfile& profile);

  std::string Sentence(Rng& rng, const SamplingParams& p) const;
  std::string Paragraph(Rng& rng, const SamplingParams& p) const;
  std::string ReceiverList(Rng& rng, const SamplingParams& p) const;
  std::string TopicList(Rng& rng, const SamplingParams& p) const;
  std::string Conversation(std::string_view receiver, std::string_view topic,
                           Rng& rng, const SamplingParams& p) const;
  std::string Transform(std::string_view article, Rng& rng,
                        const SamplingParams& p) const;
  std::string FilterAnswer(std::string_view text, Rng& rng) const;

  // Answers any prompt; dispatches on the prompt family.
  std::string Respond(std::string_view prompt, Rng& rng,
                      const SamplingParams& p) const;

  const MockProfile& profile() const { return profile_; }

 private:
  struct Candidates {
    std::vector<std::string_view> words;
    std::vector<double> logits;
  };
  enum Category { kNoun = 0, kVerb = 1, kAdj = 2 };

  std::string_view Draw(MockStyle reg, Category c, Rng& rng, const SamplingParams& p) const;
  std::string Fill(std::string_view tmpl, Rng& rng, const SamplingParams& p,
                   const std::vector<std::string>* nouns = nullptr,
                   size_t* noun_cursor = nullptr,
                   std::optional<MockStyle> reg = std::nullopt) const;
  std::string RegisterSentence(MockStyle reg, Rng& rng, const SamplingParams& p) const;
  std::string_view PickTemplate(std::span<const std::string_view> templates,
                                Rng& rng, const SamplingParams& p) const;

  MockProfile profile_;
  // Word distributions of both registers, [style][category]. A profile
  // mostly speaks its own style; web-style text also contains forum-like
  // passages in the chat register.
  Candidates candidates_[2][3];
};

}  // namespace fedsynth

#endif  // FEDSYNTH_MOCK_LANGUAGE_H_
