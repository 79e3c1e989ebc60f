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

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace fedsynth {
namespace {

constexpr std::string_view kWhitespace = " \t\r\n\f\v";

std::string_view Trim(std::string_view s) {
  const size_t b = s.find_first_not_of(kWhitespace);
  if (b == std::string_view::npos) return {};
  const size_t e = s.find_last_not_of(kWhitespace);
  return s.substr(b, e - b + 1);
}

bool IsSpace(unsigned char c) { return std::isspace(c) != 0; }
bool IsDigit(unsigned char c) { return c >= '0' && c <= '9'; }
bool IsLetter(unsigned char c) { return std::isalpha(c) != 0 || c >= 0x80; }

// True if `line` starts with a turn marker: optional "**", a label of at most
// three words, ':' and an optional closing "**".
bool MatchTurnMarker(std::string_view line, std::string* speaker,
                     std::string_view* text) {
  std::string_view rest = line.substr(std::min(line.size(), line.find_first_not_of(kWhitespace)));
  if (rest.starts_with("**")) rest.remove_prefix(2);
  const size_t colon = rest.find(':');
  if (colon == std::string_view::npos || colon == 0 || colon > 40) return false;
  std::string_view label = rest.substr(0, colon);
  if (label.ends_with("**")) label.remove_suffix(2);
  label = Trim(label);
  if (label.empty() || !IsLetter(static_cast<unsigned char>(label.front()))) return false;
  int words = 1;
  for (unsigned char c : label) {
    if (c == ' ') {
      ++words;
    } else if (!(IsLetter(c) || IsDigit(c) || c == '.' || c == '\'' || c == '-' || c == '_')) {
      return false;
    }
  }
  if (words > 3) return false;
  std::string_view after = rest.substr(colon + 1);
  if (after.starts_with("**")) after.remove_prefix(2);
  const size_t b = after.find_first_not_of(kWhitespace);
  *text = b == std::string_view::npos ? std::string_view{} : after.substr(b);
  *speaker = std::string(label);
  return true;
}

}  // namespace

std::string_view SourceName(Source source) {
  switch (source) {
    case Source::kFiltered: return "filtered";
    case Source::kGeneratedChat: return "generated_chat";
    case Source::kTransformed: return "transformed";
    case Source::kRaw: return "raw";
    case Source::kPrivateSim: return "private_sim";
  }
  return "unknown";
}

absl::StatusOr<Source> ParseSource(std::string_view name) {
  for (Source s : {Source::kFiltered, Source::kGeneratedChat, Source::kTransformed,
                   Source::kRaw, Source::kPrivateSim}) {
    if (SourceName(s) == name) return s;
  }
  return absl::InvalidArgumentError("unknown source tag: " + std::string(name));
}

absl::StatusOr<Example> Example::Create(std::string_view text, Source source,
                                        Meta meta) {
  std::string_view trimmed = Trim(text);
  if (trimmed.empty()) return absl::InvalidArgumentError("example text is empty");
  return Example(std::string(trimmed), source, std::move(meta));
}

absl::StatusOr<Vocabulary> Vocabulary::Create(std::vector<std::string> words,
                                              TokenId oov_id) {
  if (oov_id < 0 || static_cast<size_t>(oov_id) >= words.size()) {
    return absl::InvalidArgumentError("oov_id out of range");
  }
  Vocabulary v;
  v.index_.reserve(words.size());
  for (size_t i = 0; i < words.size(); ++i) {
    if (!v.index_.emplace(words[i], static_cast<TokenId>(i)).second) {
      return absl::InvalidArgumentError("duplicate vocabulary word: " + words[i]);
    }
  }
  v.words_ = std::move(words);
  v.oov_id_ = oov_id;
  return v;
}

absl::StatusOr<Vocabulary> Vocabulary::Build(std::span<const Example> corpus,
                                             int size) {
  if (size < 1) return absl::InvalidArgumentError("vocabulary size must be >= 1");
  std::unordered_map<std::string, int64_t> counts;
  for (const Example& ex : corpus) {
    for (std::string& w : SplitWords(ex.text())) ++counts[std::move(w)];
  }
  counts.erase(std::string(kOovToken));
  std::vector<std::pair<std::string, int64_t>> ranked(counts.begin(), counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  std::vector<std::string> words{std::string(kOovToken)};
  for (size_t i = 0; i < ranked.size() && words.size() < static_cast<size_t>(size); ++i) {
    words.push_back(ranked[i].first);
  }
  return Create(std::move(words), 0);
}

absl::StatusOr<Vocabulary> Vocabulary::Load(const std::string& path) {
  std::ifstream in(path);
  if (!in) return absl::NotFoundError("cannot open vocabulary " + path);
  std::vector<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    words.push_back(line);
  }
  if (words.empty()) return absl::InvalidArgumentError("empty vocabulary file " + path);
  return Create(std::move(words), 0);
}

absl::Status Vocabulary::Save(const std::string& path) const {
  if (oov_id_ != 0) {
    return absl::FailedPreconditionError("vocabulary files require OOV at id 0");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) return absl::UnavailableError("cannot write " + path);
  for (const std::string& w : words_) out << w << '\n';
  return out ? absl::OkStatus() : absl::DataLossError("write failed: " + path);
}

TokenId Vocabulary::Lookup(std::string_view word) const {
  auto it = index_.find(std::string(word));
  return it == index_.end() ? oov_id_ : it->second;
}

std::vector<std::string> SplitWords(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  enum class Run { kNone, kLetters, kDigits } run = Run::kNone;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
    run = Run::kNone;
  };
  for (size_t i = 0; i < text.size(); ++i) {
    const unsigned char c = static_cast<unsigned char>(text[i]);
    if (IsSpace(c)) {
      flush();
    } else if (IsLetter(c)) {
      if (run == Run::kDigits) flush();
      run = Run::kLetters;
      cur.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
    } else if (IsDigit(c)) {
      if (run == Run::kLetters) flush();
      run = Run::kDigits;
      cur.push_back(static_cast<char>(c));
    } else if (c == '\'' && run == Run::kLetters && i + 1 < text.size() &&
               IsLetter(static_cast<unsigned char>(text[i + 1]))) {
      cur.push_back('\'');
    } else {
      flush();
      out.emplace_back(1, static_cast<char>(c));
    }
  }
  flush();
  return out;
}

TokenizedExample Tokenize(std::string_view text, const Vocabulary& vocab) {
  TokenizedExample out;
  for (const std::string& w : SplitWords(text)) {
    const TokenId id = vocab.Lookup(w);
    out.ids.push_back(id);
    if (id == vocab.oov_id()) ++out.oov_count;
  }
  return out;
}

absl::StatusOr<double> OovRate(const TokenizedExample& example) {
  if (example.ids.empty()) {
    return absl::InvalidArgumentError("OOV rate undefined for an empty sequence");
  }
  return static_cast<double>(example.oov_count) / static_cast<double>(example.ids.size());
}

double VocabCoverage(std::span<const Example> corpus, const Vocabulary& vocab) {
  if (vocab.size() <= 1) return 0.0;
  std::vector<char> seen(vocab.size(), 0);
  int covered = 0;
  for (const Example& ex : corpus) {
    for (const std::string& w : SplitWords(ex.text())) {
      const TokenId id = vocab.Lookup(w);
      if (id != vocab.oov_id() && !seen[id]) {
        seen[id] = 1;
        ++covered;
      }
    }
  }
  return static_cast<double>(covered) / static_cast<double>(vocab.size() - 1);
}

std::vector<Turn> ParseTurns(std::string_view chat_text) {
  std::vector<Turn> turns;
  size_t pos = 0;
  while (pos <= chat_text.size()) {
    size_t nl = chat_text.find('\n', pos);
    if (nl == std::string_view::npos) nl = chat_text.size();
    std::string_view line = chat_text.substr(pos, nl - pos);
    if (line.ends_with('\r')) line.remove_suffix(1);
    pos = nl + 1;

    std::string speaker;
    std::string_view text;
    if (MatchTurnMarker(line, &speaker, &text)) {
      turns.push_back({std::move(speaker), std::string(text)});
    } else if (!turns.empty() && !Trim(line).empty()) {
      std::string& body = turns.back().text;
      if (!body.empty()) body.push_back('\n');
      body.append(line);
    }
    // Lines before the first marker (preambles) are dropped.
  }
  for (Turn& t : turns) t.text = std::string(Trim(t.text));
  std::erase_if(turns, [](const Turn& t) { return t.text.empty(); });
  return turns;
}

std::vector<Example> SplitTurns(std::string_view chat_text, Source source,
                                const Meta& meta) {
  std::vector<Example> out;
  if (Trim(chat_text).empty()) return out;
  std::vector<Turn> turns = ParseTurns(chat_text);
  if (turns.empty()) {
    Meta m = meta;
    m["no_turn_markers"] = "1";
    if (auto ex = Example::Create(chat_text, source, std::move(m)); ex.ok()) {
      out.push_back(*std::move(ex));
    }
    return out;
  }
  for (size_t i = 0; i < turns.size(); ++i) {
    Meta m = meta;
    m["speaker"] = turns[i].speaker;
    m["turn"] = std::to_string(i);
    if (auto ex = Example::Create(turns[i].text, source, std::move(m)); ex.ok()) {
      out.push_back(*std::move(ex));
    }
  }
  return out;
}

std::vector<Example> SplitSentences(std::string_view text, Source source,
                                    const Meta& meta) {
  std::vector<Example> out;
  size_t start = 0;
  auto emit = [&](size_t end) {
    std::string_view s = Trim(text.substr(start, end - start));
    if (!s.empty()) {
      Meta m = meta;
      m["sentence"] = std::to_string(out.size());
      if (auto ex = Example::Create(s, source, std::move(m)); ex.ok()) {
        out.push_back(*std::move(ex));
      }
    }
    start = end;
  };
  for (size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if ((c == '.' || c == '!' || c == '?') &&
        (i + 1 == text.size() || IsSpace(static_cast<unsigned char>(text[i + 1])))) {
      emit(i + 1);
    }
  }
  emit(text.size());
  return out;
}

nlohmann::json ExampleToJson(const Example& example) {
  nlohmann::json meta = nlohmann::json::object();
  for (const auto& [k, v] : example.meta()) meta[k] = v;
  return {{"text", example.text()},
          {"source", std::string(SourceName(example.source()))},
          {"meta", std::move(meta)}};
}

absl::StatusOr<Example> ExampleFromJson(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("text") || !j["text"].is_string() ||
      !j.contains("source") || !j["source"].is_string()) {
    return absl::InvalidArgumentError("corpus record needs string fields text and source");
  }
  auto source = ParseSource(j["source"].get<std::string>());
  if (!source.ok()) return source.status();
  Meta meta;
  if (j.contains("meta")) {
    if (!j["meta"].is_object()) return absl::InvalidArgumentError("meta must be an object");
    for (const auto& [k, v] : j["meta"].items()) {
      meta[k] = v.is_string() ? v.get<std::string>() : v.dump();
    }
  }
  return Example::Create(j["text"].get<std::string>(), *source, std::move(meta));
}

absl::StatusOr<Corpus> ReadCorpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) return absl::NotFoundError("cannot open corpus " + path);
  Corpus corpus;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (Trim(line).empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded()) {
      return absl::InvalidArgumentError(path + ":" + std::to_string(line_no) + ": invalid JSON");
    }
    auto ex = ExampleFromJson(j);
    if (!ex.ok()) {
      return absl::InvalidArgumentError(path + ":" + std::to_string(line_no) + ": " +
                                        std::string(ex.status().message()));
    }
    corpus.push_back(*std::move(ex));
  }
  return corpus;
}

absl::Status WriteCorpus(const std::string& path, std::span<const Example> corpus) {
  std::ofstream out(path, std::ios::binary);
  if (!out) return absl::UnavailableError("cannot write " + path);
  for (const Example& ex : corpus) {
    out << ExampleToJson(ex).dump(-1, ' ', false, nlohmann::json::error_handler_t::replace)
        << '\n';
  }
  return out ? absl::OkStatus() : absl::DataLossError("write failed: " + path);
}

}  // namespace fedsynth
