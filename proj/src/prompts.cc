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
#include "fedsynth/prompts.h"

#include "absl/strings/str_cat.h"

namespace fedsynth {
namespace {

constexpr std::string_view kFilterText =
    "Determine whether the following topic is likely to be discussed by people on "
    "their mobile phones. Give a score of 0 or 1, where 1 means very likely, and 0 "
    "means unlikely.\n[TEXT]";

constexpr std::string_view kReceiversText =
    "Imagine you are a [GENDER] at age [AGE]. You are using the [CHAT-APP] APP to "
    "message someone on your mobile phone on the [TIME] of a [DAY]. Generate a list "
    "of potential message receivers.";

constexpr std::string_view kTopicsText =
    "Imagine you are a [GENDER] at age [AGE]. You are using the [CHAT-APP] APP to "
    "message [RECEIVER] on your mobile phone on the [TIME] of a [DAY]. Generate a "
    "list of potential message topics.";

constexpr std::string_view kConversationText =
    "Imagine you are a [GENDER] at age [AGE]. You are using the [CHAT-APP] APP to "
    "message [RECEIVER] on your mobile phone on the [TIME] of a [DAY]. You want to "
    "chat about the following topic: [TOPIC]. Generate the conversation between you "
    "and your message receiver. Do not include information other than the "
    "conversation.";

constexpr std::string_view kTransformText =
    "Convert the following article to a conversation that you may message over your "
    "mobile phone. Generate the conversation. Include as many details as "
    "possible.\n[TEXT]";

bool IsPlaceholderChar(char c) { return (c >= 'A' && c <= 'Z') || c == '-'; }

// Length of the placeholder starting at text[i] == '[', or 0.
size_t PlaceholderLength(std::string_view text, size_t i) {
  size_t j = i + 1;
  while (j < text.size() && IsPlaceholderChar(text[j])) ++j;
  return (j > i + 1 && j < text.size() && text[j] == ']') ? j - i + 1 : 0;
}

}  // namespace

const PromptTemplate& PromptTemplate::Get(PromptKind kind) {
  static const PromptTemplate kFilter(PromptKind::kFilter, kFilterText);
  static const PromptTemplate kReceivers(PromptKind::kGenReceivers, kReceiversText);
  static const PromptTemplate kTopics(PromptKind::kGenTopics, kTopicsText);
  static const PromptTemplate kConversation(PromptKind::kGenConversation, kConversationText);
  static const PromptTemplate kTransform(PromptKind::kTransform, kTransformText);
  switch (kind) {
    case PromptKind::kFilter: return kFilter;
    case PromptKind::kGenReceivers: return kReceivers;
    case PromptKind::kGenTopics: return kTopics;
    case PromptKind::kGenConversation: return kConversation;
    case PromptKind::kTransform: return kTransform;
  }
  return kFilter;
}

std::vector<std::string> PromptTemplate::Placeholders() const {
  std::vector<std::string> names;
  for (size_t i = 0; i < text_.size(); ++i) {
    if (text_[i] != '[') continue;
    if (size_t len = PlaceholderLength(text_, i); len > 0) {
      std::string name(text_.substr(i + 1, len - 2));
      if (std::find(names.begin(), names.end(), name) == names.end()) names.push_back(name);
      i += len - 1;
    }
  }
  return names;
}

absl::StatusOr<std::string> PromptTemplate::Render(const Bindings& bindings) const {
  std::string out;
  out.reserve(text_.size() + 256);
  for (size_t i = 0; i < text_.size(); ++i) {
    const size_t len = text_[i] == '[' ? PlaceholderLength(text_, i) : 0;
    if (len == 0) {
      out.push_back(text_[i]);
      continue;
    }
    const std::string name(text_.substr(i + 1, len - 2));
    auto it = bindings.find(name);
    if (it == bindings.end()) {
      return absl::InvalidArgumentError("missing_binding: [" + name + "]");
    }
    out += it->second;
    i += len - 1;
  }
  return out;
}

Bindings VariableAssignment::ToBindings() const {
  Bindings b = {{"AGE", age}, {"GENDER", gender}, {"TIME", time},
                {"DAY", day}, {"CHAT-APP", chat_app}};
  if (receiver) b["RECEIVER"] = *receiver;
  if (topic) b["TOPIC"] = *topic;
  return b;
}

Meta VariableAssignment::ToMeta() const {
  Meta m = {{"age", age}, {"gender", gender}, {"time", time},
            {"day", day}, {"chat_app", chat_app}};
  if (receiver) m["receiver"] = *receiver;
  if (topic) m["topic"] = *topic;
  return m;
}

std::string VariableAssignment::Key() const {
  return absl::StrCat(age, "|", gender, "|", time, "|", day, "|", chat_app, "|",
                      receiver.value_or(""), "|", topic.value_or(""));
}

VariableSets VariableSets::Default() {
  VariableSets s;
  for (int age = 15; age <= 55; ++age) s.ages.push_back(std::to_string(age));
  s.ages.insert(s.ages.end(), {"between 55 and 59", "between 60 and 64", "over 65"});
  s.genders = {"male", "female"};
  s.times = {"morning", "afternoon", "night"};
  s.days = {"New Year's Day", "Martin Luther King Jr. Day", "Valentine's Day",
            "Easter", "Mother's Day", "Memorial Day", "Father's Day",
            "Independence Day", "Labor Day", "Thanksgiving", "Christmas",
            "vacation day"};
  for (const char* season : {"spring", "summer", "autumn", "winter"}) {
    for (const char* weekday : {"Monday", "Tuesday", "Wednesday", "Thursday",
                                "Friday", "Saturday", "Sunday"}) {
      s.days.push_back(absl::StrCat(weekday, " in the ", season));
    }
  }
  s.chat_apps = {"Android Messages", "Facebook Messenger", "Snapchat", "Instagram",
                 "WhatsApp", "Discord", "Telegram"};
  return s;
}

size_t VariableSets::GridSize() const {
  return ages.size() * genders.size() * times.size() * days.size() * chat_apps.size();
}

VariableAssignment VariableSets::At(size_t index) const {
  VariableAssignment a;
  a.chat_app = chat_apps[index % chat_apps.size()];
  index /= chat_apps.size();
  a.day = days[index % days.size()];
  index /= days.size();
  a.time = times[index % times.size()];
  index /= times.size();
  a.gender = genders[index % genders.size()];
  index /= genders.size();
  a.age = ages[index % ages.size()];
  return a;
}

std::vector<VariableAssignment> EnumerateVariableGrid(const VariableSets& sets) {
  std::vector<VariableAssignment> out;
  const size_t n = sets.GridSize();
  out.reserve(n);
  for (size_t i = 0; i < n; ++i) out.push_back(sets.At(i));
  return out;
}

absl::StatusOr<std::string> RenderPrompt(PromptKind kind, const VariableAssignment& a) {
  return PromptTemplate::Get(kind).Render(a.ToBindings());
}

absl::StatusOr<std::string> RenderPrompt(PromptKind kind, const Example& example) {
  return PromptTemplate::Get(kind).Render({{"TEXT", example.text()}});
}

}  // namespace fedsynth
