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
#include "fedsynth/mock_language.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <set>
#include <unordered_set>

#include "absl/strings/ascii.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_join.h"
#include "fedsynth/corpus.h"

namespace fedsynth {
namespace {

using Pool = std::array<std::vector<std::string_view>, 3>;  // noun, verb, adj

const Pool& ChatPool() {
  static const Pool pool = {
      std::vector<std::string_view>{
          "dinner", "movie", "party", "pizza", "coffee", "game", "show", "trip",
          "beach", "birthday", "gift", "picture", "song", "concert", "lunch",
          "breakfast", "puppy", "cat", "dog", "homework", "car", "mall", "shoes",
          "dress", "cake", "cookies", "tacos", "burger", "gym", "nap", "vacation",
          "flight", "hotel", "pool", "ticket", "selfie", "video", "meme", "snacks",
          "couch", "kitchen", "laundry", "groceries", "brunch", "baby", "playlist",
          "sleepover", "hoodie", "popcorn", "icecream"},
      std::vector<std::string_view>{
          "grab", "watch", "call", "meet", "bring", "pick", "cook", "order", "need",
          "wash", "try", "play", "visit", "help", "send", "share", "finish", "plan",
          "book", "buy", "make", "clean", "wear", "drive", "eat", "drink", "sleep",
          "join", "skip", "check", "find", "fix", "borrow", "text", "bake", "rent"},
      std::vector<std::string_view>{
          "fun", "awesome", "cute", "tired", "hungry", "excited", "busy", "amazing",
          "crazy", "sweet", "funny", "perfect", "cool", "nice", "bored", "happy",
          "sad", "sick", "ready", "lucky", "cozy", "chill", "proud", "weird",
          "great", "yummy", "sleepy", "hyped"}};
  return pool;
}

const Pool& WebPool() {
  static const Pool pool = {
      std::vector<std::string_view>{
          "system", "market", "product", "company", "service", "industry",
          "research", "policy", "government", "county", "program", "report",
          "software", "customer", "process", "development", "management",
          "information", "equipment", "property", "investment", "technology",
          "platform", "application", "council", "region", "district", "analysis",
          "community", "department", "material", "manufacturer", "installation",
          "network", "revenue", "strategy", "committee", "regulation",
          "infrastructure", "facility", "website", "database", "insurance",
          "contractor", "component", "procedure", "document", "solution",
          "organization", "university"},
      std::vector<std::string_view>{
          "provide", "include", "require", "develop", "support", "offer", "improve",
          "increase", "reduce", "establish", "manage", "operate", "maintain",
          "announce", "produce", "deliver", "ensure", "implement", "consider",
          "identify", "evaluate", "approve", "install", "design", "publish",
          "review", "create", "promote", "expand", "acquire", "achieve",
          "describe", "determine", "represent", "contain", "distribute"},
      std::vector<std::string_view>{
          "annual", "federal", "commercial", "industrial", "significant",
          "additional", "professional", "technical", "environmental", "financial",
          "regional", "public", "global", "digital", "comprehensive", "available",
          "effective", "specific", "various", "economic", "historical",
          "residential", "national", "municipal", "strategic", "medical", "legal",
          "corporate"}};
  return pool;
}

const std::unordered_set<std::string_view>& WordSet(const Pool& pool) {
  static const auto build = [](const Pool& p) {
    std::unordered_set<std::string_view> s;
    for (const auto& cat : p) s.insert(cat.begin(), cat.end());
    return s;
  };
  static const std::unordered_set<std::string_view> chat = build(ChatPool());
  static const std::unordered_set<std::string_view> web = build(WebPool());
  return &pool == &ChatPool() ? chat : web;
}

const std::unordered_set<std::string_view>& Nouns() {
  static const std::unordered_set<std::string_view> nouns = [] {
    std::unordered_set<std::string_view> s(ChatPool()[0].begin(), ChatPool()[0].end());
    s.insert(WebPool()[0].begin(), WebPool()[0].end());
    return s;
  }();
  return nouns;
}

constexpr std::string_view kChatTemplates[] = {
    "are you around {t} ?",
    "do you want to {v} the {n} {t} ?",
    "i just had to {v} the {n} lol",
    "that sounds {a} !",
    "i can't wait to {v} the {n}",
    "can you {v} my {n} {t} ?",
    "omg the {n} was so {a}",
    "i'm so {a} right now",
    "let's {v} some {n} {t}",
    "did you {v} the {n} yet ?",
    "yeah i will {v} it {t}",
    "ok see you {t} !",
    "i miss you so much",
    "love you !",
    "haha yes the {n} is {a}",
    "where did you put the {n} ?",
    "no worries , i can {v} the {n}",
    "thanks for the {n} , it was {a}",
    "we should {v} a {n} {t}",
    "i'm {a} , want to {v} {n} ?",
};

constexpr std::string_view kWebTemplates[] = {
    "the {n} will {v} the {a} {n} of the {n} .",
    "the {a} {n} is expected to {v} a new {n} .",
    "according to the {n} , the {n} was {a} .",
    "this {n} can {v} {a} {n} for the {n} and the {n} .",
    "in addition , the {n} must {v} the {n} .",
    "the {n} of the {n} has been {a} since the {n} .",
    "each {n} should {v} a {a} {n} .",
    "for more details about the {n} , please {v} the {n} .",
    "the {n} said that it would {v} the {a} {n} .",
    "it is important to {v} the {n} before the {n} .",
    "a {a} {n} may {v} the {n} in the {n} .",
    "the {n} and the {n} {v} the {a} {n} every year .",
};

constexpr std::string_view kChatTopicTemplates[] = {
    "i can't wait to {v} the {n}", "the {n} {t}", "planning to {v} the {n} {t}",
    "my {a} {n}", "want to {v} some {n}", "the {a} {n} at the {n}",
};

constexpr std::string_view kWebTopicTemplates[] = {
    "the {a} {n}", "the {n} of the {n}", "how to {v} the {n}",
};

constexpr std::string_view kTimes[] = {
    "tonight",  "tomorrow",   "later",          "this weekend", "after work",
    "right now", "in the morning", "after school", "on friday",  "next week",
};

struct Receiver {
  std::string_view phrase;
  std::string_view label;
};

constexpr Receiver kReceivers[] = {
    {"your mom", "Mom"},           {"your dad", "Dad"},
    {"your best friend", "Friend"}, {"your boyfriend", "Babe"},
    {"your girlfriend", "Babe"},   {"your sister", "Sis"},
    {"your brother", "Bro"},       {"your family", "Mom"},
    {"your coworker", "Coworker"}, {"your boss", "Boss"},
    {"your roommate", "Roommate"}, {"your group chat", "Friend"},
    {"your teammate", "Teammate"}, {"your neighbor", "Neighbor"},
    {"your grandma", "Grandma"},
};

// Native logits are 0.2 * ln(weight), so sampling at temperature 0.2 follows
// the weights exactly; higher temperatures flatten, 0 is greedy.
constexpr double kLogitScale = 0.2;

std::string_view LabelFor(std::string_view receiver) {
  for (const Receiver& r : kReceivers) {
    if (r.phrase == receiver) return r.label;
  }
  return "Friend";
}

std::string Lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// Text after the first newline of a prompt; the payload of filter/transform.
std::string_view Payload(std::string_view prompt) {
  const size_t nl = prompt.find('\n');
  return nl == std::string_view::npos ? std::string_view{} : prompt.substr(nl + 1);
}

std::string_view Between(std::string_view s, std::string_view open,
                         std::string_view close) {
  const size_t b = s.find(open);
  if (b == std::string_view::npos) return {};
  const size_t start = b + open.size();
  const size_t e = s.find(close, start);
  if (e == std::string_view::npos) return {};
  return s.substr(start, e - start);
}

std::string Truncate(std::string text, int max_tokens, bool* truncated) {
  *truncated = false;
  int words = 0;
  bool in_word = false;
  for (size_t i = 0; i < text.size(); ++i) {
    const bool space = std::isspace(static_cast<unsigned char>(text[i])) != 0;
    if (!space && !in_word && ++words > max_tokens) {
      *truncated = true;
      text.resize(i);
      while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) {
        text.pop_back();
      }
      return text;
    }
    in_word = !space;
  }
  return text;
}

}  // namespace

bool IsChatContentWord(std::string_view word) {
  return WordSet(ChatPool()).contains(word);
}

bool IsWebContentWord(std::string_view word) {
  return WordSet(WebPool()).contains(word);
}

MockLanguage::MockLanguage(const MockProfile& profile) : profile_(profile) {
  const double s = std::clamp(profile.vocab_skew, 0.0, 1.0);
  for (MockStyle reg : {MockStyle::kChatLike, MockStyle::kWebLike}) {
    const Pool& own = reg == MockStyle::kChatLike ? ChatPool() : WebPool();
    const Pool& other = reg == MockStyle::kChatLike ? WebPool() : ChatPool();
    Candidates* cands = candidates_[static_cast<int>(reg)];
    for (int c = 0; c < 3; ++c) {
      auto add = [&](const std::vector<std::string_view>& words, double mass) {
        if (mass <= 0.0) return;
        double z = 0.0;
        for (size_t r = 0; r < words.size(); ++r) z += 1.0 / static_cast<double>(r + 1);
        for (size_t r = 0; r < words.size(); ++r) {
          double w = mass / (static_cast<double>(r + 1) * z);
          if (profile.jitter > 0.0) {
            Rng rng(DeriveSeed(profile.seed, StreamTag::kMockBackend,
                               {Fingerprint(words[r])}));
            w *= std::exp(profile.jitter * std::normal_distribution<double>()(rng));
          }
          cands[c].words.push_back(words[r]);
          cands[c].logits.push_back(kLogitScale * std::log(w));
        }
      };
      add(own[c], 1.0 - s / 2.0);
      add(other[c], s / 2.0);
    }
  }
}

std::string_view MockLanguage::Draw(MockStyle reg, Category c, Rng& rng,
                                    const SamplingParams& p) const {
  const Candidates& cand = candidates_[static_cast<int>(reg)][c];
  return cand.words[TopKSample(cand.logits, p.top_k, p.temperature, rng)];
}

std::string_view MockLanguage::PickTemplate(
    std::span<const std::string_view> templates, Rng& rng,
    const SamplingParams& p) const {
  std::vector<double> logits(templates.size());
  for (size_t r = 0; r < templates.size(); ++r) {
    logits[r] = kLogitScale * -0.5 * std::log(static_cast<double>(r + 1));
  }
  return templates[TopKSample(logits, p.top_k, p.temperature, rng)];
}

std::string MockLanguage::Fill(std::string_view tmpl, Rng& rng,
                               const SamplingParams& p,
                               const std::vector<std::string>* nouns,
                               size_t* noun_cursor, std::optional<MockStyle> reg) const {
  const MockStyle r = reg.value_or(profile_.style);
  std::string out;
  for (size_t i = 0; i < tmpl.size(); ++i) {
    if (tmpl[i] == '{' && i + 2 < tmpl.size() && tmpl[i + 2] == '}') {
      switch (tmpl[i + 1]) {
        case 'n':
          if (nouns != nullptr && !nouns->empty() &&
              std::uniform_int_distribution<int>(0, 9)(rng) < 7) {
            out += (*nouns)[(*noun_cursor)++ % nouns->size()];
          } else {
            out += Draw(r, kNoun, rng, p);
          }
          break;
        case 'v': out += Draw(r, kVerb, rng, p); break;
        case 'a': out += Draw(r, kAdj, rng, p); break;
        case 't':
          out += kTimes[std::uniform_int_distribution<size_t>(0, std::size(kTimes) - 1)(rng)];
          break;
        default: out.append(tmpl.substr(i, 3));
      }
      i += 2;
    } else {
      out.push_back(tmpl[i]);
    }
  }
  return out;
}

std::string MockLanguage::RegisterSentence(MockStyle reg, Rng& rng,
                                          const SamplingParams& p) const {
  const std::span<const std::string_view> templates =
      reg == MockStyle::kChatLike ? std::span<const std::string_view>(kChatTemplates)
                                  : std::span<const std::string_view>(kWebTemplates);
  return Fill(PickTemplate(templates, rng, p), rng, p, nullptr, nullptr, reg);
}

std::string MockLanguage::Sentence(Rng& rng, const SamplingParams& p) const {
  return RegisterSentence(profile_.style, rng, p);
}

std::string MockLanguage::Paragraph(Rng& rng, const SamplingParams& p) const {
  const int n = std::uniform_int_distribution<int>(3, 6)(rng);
  // Some web documents are forum-style posts in the chat register; how many
  // grows with the overlap (one in sixteen at 0.5, none at 0).
  const MockStyle reg = profile_.style == MockStyle::kWebLike &&
                                std::bernoulli_distribution(profile_.vocab_skew / 8.0)(rng)
                            ? MockStyle::kChatLike
                            : profile_.style;
  std::vector<std::string> sentences;
  for (int i = 0; i < n; ++i) sentences.push_back(RegisterSentence(reg, rng, p));
  return absl::StrJoin(sentences, " ");
}

std::string MockLanguage::ReceiverList(Rng& rng, const SamplingParams& p) const {
  const int n = 3 + std::uniform_int_distribution<int>(0, 2)(rng) +
                static_cast<int>(std::lround(std::max(0.0, p.temperature) * 5.0));
  const bool bullets = std::uniform_int_distribution<int>(0, 3)(rng) == 0;
  // A list names each receiver once.
  std::vector<size_t> order(std::size(kReceivers));
  std::iota(order.begin(), order.end(), size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::string out;
  for (int i = 0; i < n && i < static_cast<int>(order.size()); ++i) {
    const Receiver& r = kReceivers[order[static_cast<size_t>(i)]];
    out += (bullets ? std::string("* ") : absl::StrCat(i + 1, ". ")) + std::string(r.phrase) + "\n";
  }
  return out;
}

std::string MockLanguage::TopicList(Rng& rng, const SamplingParams& p) const {
  const int n = 3 + std::uniform_int_distribution<int>(0, 2)(rng);
  std::string out;
  std::set<std::string> seen;
  for (int i = 0, tries = 0; i < n && tries < 8 * n; ++tries) {
    std::string_view tmpl = profile_.style == MockStyle::kChatLike
                                ? PickTemplate(kChatTopicTemplates, rng, p)
                                : PickTemplate(kWebTopicTemplates, rng, p);
    std::string topic = Fill(tmpl, rng, p);
    if (!seen.insert(absl::AsciiStrToLower(topic)).second) continue;
    absl::StrAppend(&out, "- ", topic, "\n");
    ++i;
  }
  return out;
}

std::string MockLanguage::Conversation(std::string_view receiver,
                                       std::string_view topic, Rng& rng,
                                       const SamplingParams& p) const {
  const std::string label(LabelFor(receiver));
  const int turns = std::uniform_int_distribution<int>(4, 9)(rng);
  std::string out;
  for (int i = 0; i < turns; ++i) {
    std::string body;
    if (i == 0) {
      body = absl::StrCat("hey ", Lower(label), " , ",
                          topic.empty() ? Sentence(rng, p) : std::string(topic));
    } else {
      body = Sentence(rng, p);
      if (std::uniform_int_distribution<int>(0, 2)(rng) == 0) {
        absl::StrAppend(&body, " ", Sentence(rng, p));
      }
    }
    absl::StrAppend(&out, "**", i % 2 == 0 ? std::string("Me") : label, ":** ", body, "\n");
  }
  return out;
}

std::string MockLanguage::Transform(std::string_view article, Rng& rng,
                                    const SamplingParams& p) const {
  std::vector<std::string> nouns;
  for (std::string& w : SplitWords(article)) {
    if (Nouns().contains(w)) nouns.push_back(std::move(w));
  }
  size_t cursor = 0;
  const int turns = std::uniform_int_distribution<int>(6, 10)(rng);
  std::string out;
  for (int i = 0; i < turns; ++i) {
    std::string body;
    if (i == 0) {
      body = absl::StrCat("hey , did you hear about the ",
                          nouns.empty() ? std::string(Draw(profile_.style, kNoun, rng, p))
                                        : nouns[cursor++ % nouns.size()],
                          " ?");
    } else {
      std::string_view tmpl = profile_.style == MockStyle::kChatLike
                                  ? PickTemplate(kChatTemplates, rng, p)
                                  : PickTemplate(kWebTemplates, rng, p);
      body = Fill(tmpl, rng, p, &nouns, &cursor);
    }
    absl::StrAppend(&out, "**", i % 2 == 0 ? "Me" : "Friend", ":** ", body, "\n");
  }
  return out;
}

std::string MockLanguage::FilterAnswer(std::string_view text, Rng& rng) const {
  int chat = 0;
  int total = 0;
  for (const std::string& w : SplitWords(text)) {
    if (IsChatContentWord(w)) {
      ++chat;
      ++total;
    } else if (IsWebContentWord(w)) {
      ++total;
    }
  }
  const char* score = total > 0 && chat * 10 >= total * 3 ? "1" : "0";
  switch (std::uniform_int_distribution<int>(0, 2)(rng)) {
    case 0: return score;
    case 1: return absl::StrCat("Score: ", score);
    default: return absl::StrCat("The score is ", score, ".");
  }
}

std::string MockLanguage::Respond(std::string_view prompt, Rng& rng,
                                  const SamplingParams& p) const {
  if (prompt.find("Determine whether the following topic is likely") != std::string_view::npos) {
    return FilterAnswer(Payload(prompt), rng);
  }
  if (prompt.find("Generate a list of potential message receivers") != std::string_view::npos) {
    return ReceiverList(rng, p);
  }
  if (prompt.find("Generate a list of potential message topics") != std::string_view::npos) {
    return TopicList(rng, p);
  }
  if (prompt.find("Generate the conversation between you") != std::string_view::npos) {
    return Conversation(Between(prompt, "to message ", " on your mobile phone"),
                        Between(prompt, "following topic: ", ". Generate the conversation"),
                        rng, p);
  }
  if (prompt.find("Convert the following article to a conversation") != std::string_view::npos) {
    return Transform(Payload(prompt), rng, p);
  }
  if (profile_.style == MockStyle::kWebLike) return Paragraph(rng, p);
  return Conversation("your best friend", "", rng, p);
}

namespace {

class MockBackend : public CompletionBackend {
 public:
  explicit MockBackend(const MockProfile& profile) : language_(profile) {}

  absl::StatusOr<CompletionResponse> Complete(
      const CompletionRequest& request) const override {
    if (absl::Status s = request.params.Validate(); !s.ok()) return s;
    Rng rng(DeriveSeed(language_.profile().seed, StreamTag::kMockBackend,
                       {Fingerprint(request.prompt), request.params.seed}));
    CompletionResponse response;
    bool truncated = false;
    response.text = Truncate(language_.Respond(request.prompt, rng, request.params),
                             request.params.max_tokens, &truncated);
    response.finish = truncated ? FinishReason::kLength : FinishReason::kStop;
    return response;
  }

  std::string Name() const override {
    return "mock:" + std::string(MockStyleName(language_.profile().style));
  }

 private:
  MockLanguage language_;
};

}  // namespace

std::unique_ptr<CompletionBackend> MakeMockBackend(const MockProfile& profile) {
  return std::make_unique<MockBackend>(profile);
}

std::unique_ptr<CompletionBackend> MockProfileBackend(MockStyle style,
                                                      double vocab_skew) {
  MockProfile profile;
  profile.style = style;
  profile.vocab_skew = vocab_skew;
  return MakeMockBackend(profile);
}

}  // namespace fedsynth
