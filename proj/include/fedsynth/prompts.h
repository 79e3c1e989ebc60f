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
// Prompt templates for filtering, chained chat generation and transformation,
// and the categorical variable grid that drives chat generation.

#ifndef FEDSYNTH_PROMPTS_H_
#define FEDSYNTH_PROMPTS_H_

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "absl/status/statusor.h"
#include "fedsynth/corpus.h"

namespace fedsynth {

enum class PromptKind { kFilter, kGenReceivers, kGenTopics, kGenConversation, kTransform };

using Bindings = std::map<std::string, std::string>;

class PromptTemplate {
 public:
  static const PromptTemplate& Get(PromptKind kind);

  PromptKind kind() const { return kind_; }
  std::string_view text() const { return text_; }

  // Names inside [BRACKETS], in order of first appearance.
  std::vector<std::string> Placeholders() const;

  // Substitutes every placeholder; bound values are inserted verbatim and not
  // rescanned. Fails with kInvalidArgument ("missing_binding") if any
  // placeholder is unbound.
  absl::StatusOr<std::string> Render(const Bindings& bindings) const;

 private:
  PromptTemplate(PromptKind kind, std::string_view text) : kind_(kind), text_(text) {}

  PromptKind kind_;
  std::string_view text_;
};

struct VariableAssignment {
  std::string age;
  std::string gender;
  std::string time;
  std::string day;
  std::string chat_app;
  std::optional<std::string> receiver;
  std::optional<std::string> topic;

  Bindings ToBindings() const;
  Meta ToMeta() const;
  // Stable sort key over all set variables.
  std::string Key() const;
};

struct VariableSets {
  std::vector<std::string> ages;
  std::vector<std::string> genders;
  std::vector<std::string> times;
  std::vector<std::string> days;
  std::vector<std::string> chat_apps;

  // 41 integer ages 15..55 plus three age groups; 2 genders; 3 times; 40
  // days (11 holidays, "vacation day", 7 weekdays x 4 seasons); 7 apps.
  static VariableSets Default();

  size_t GridSize() const;
  // Mixed-radix decoding of index in [0, GridSize()); chat_app varies fastest.
  VariableAssignment At(size_t index) const;
};

// All base combinations (receiver/topic unset), in At() order.
std::vector<VariableAssignment> EnumerateVariableGrid(
    const VariableSets& sets = VariableSets::Default());

absl::StatusOr<std::string> RenderPrompt(PromptKind kind, const VariableAssignment& a);
absl::StatusOr<std::string> RenderPrompt(PromptKind kind, const Example& example);

}  // namespace fedsynth

#endif  // FEDSYNTH_PROMPTS_H_
