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
// Text records, word-level tokenization, vocabularies and the corpus quality
// metrics (vocabulary coverage, OOV rate).

#ifndef FEDSYNTH_CORPUS_H_
#define FEDSYNTH_CORPUS_H_

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "json.hpp"

namespace fedsynth {

enum class Source { kFiltered, kGeneratedChat, kTransformed, kRaw, kPrivateSim };

std::string_view SourceName(Source source);
absl::StatusOr<Source> ParseSource(std::string_view name);

using Meta = std::map<std::string, std::string>;

// One training/synthesis record. Text is whitespace-trimmed and never empty;
// the source tag is fixed at creation.
class Example {
 public:
  static absl::StatusOr<Example> Create(std::string_view text, Source source,
                                        Meta meta = {});

  const std::string& text() const { return text_; }
  Source source() const { return source_; }
  const Meta& meta() const { return meta_; }
  Meta& mutable_meta() { return meta_; }

  friend bool operator==(const Example&, const Example&) = default;

 private:
  Example(std::string text, Source source, Meta meta)
      : text_(std::move(text)), source_(source), meta_(std::move(meta)) {}

  std::string text_;
  Source source_;
  Meta meta_;
};

using Corpus = std::vector<Example>;

using TokenId = int32_t;

// Fixed word table. Lookups are total: unknown words map to oov_id().
class Vocabulary {
 public:
  static constexpr std::string_view kOovToken = "<oov>";

  // `words` must be distinct; words[oov_id] is the reserved OOV entry.
  static absl::StatusOr<Vocabulary> Create(std::vector<std::string> words,
                                           TokenId oov_id);

  // Top (size - 1) words of `corpus` by frequency (ties broken
  // lexicographically) plus OOV at id 0.
  static absl::StatusOr<Vocabulary> Build(std::span<const Example> corpus,
                                          int size);

  // One word per line, line order defines ids, OOV is line 0.
  static absl::StatusOr<Vocabulary> Load(const std::string& path);
  absl::Status Save(const std::string& path) const;

  TokenId Lookup(std::string_view word) const;
  const std::string& Word(TokenId id) const { return words_[id]; }
  TokenId oov_id() const { return oov_id_; }
  int size() const { return static_cast<int>(words_.size()); }
  const std::vector<std::string>& words() const { return words_; }

 private:
  Vocabulary() = default;

  std::vector<std::string> words_;
  TokenId oov_id_ = 0;
  std::unordered_map<std::string, TokenId> index_;
};

struct TokenizedExample {
  std::vector<TokenId> ids;
  int oov_count = 0;
};

// Lowercases ASCII letters and splits into letter runs (apostrophes inside a
// word are kept, e.g. "can't"), digit runs, and single punctuation marks.
// Bytes >= 0x80 are treated as letters.
std::vector<std::string> SplitWords(std::string_view text);

TokenizedExample Tokenize(std::string_view text, const Vocabulary& vocab);

// oov_count / |ids|; an empty sequence has no defined rate.
absl::StatusOr<double> OovRate(const TokenizedExample& example);

// Fraction of non-OOV vocabulary words that occur at least once in `corpus`.
double VocabCoverage(std::span<const Example> corpus, const Vocabulary& vocab);

struct Turn {
  std::string speaker;
  std::string text;
};

// Parses "**Speaker:** text" / "Speaker: text" lines. Lines without a marker
// continue the previous turn (joined with '\n'). Returns an empty vector when
// no marker is found.
std::vector<Turn> ParseTurns(std::string_view chat_text);

// One Example per turn. Text without any turn marker becomes a single example
// with meta["no_turn_markers"] = "1".
std::vector<Example> SplitTurns(std::string_view chat_text,
                                Source source = Source::kGeneratedChat,
                                const Meta& meta = {});

// Boundaries at '.', '!' or '?' followed by whitespace. Abbreviations are not
// special-cased.
std::vector<Example> SplitSentences(std::string_view text,
                                    Source source = Source::kFiltered,
                                    const Meta& meta = {});

nlohmann::json ExampleToJson(const Example& example);
absl::StatusOr<Example> ExampleFromJson(const nlohmann::json& j);

absl::StatusOr<Corpus> ReadCorpus(const std::string& path);
absl::Status WriteCorpus(const std::string& path, std::span<const Example> corpus);

}  // namespace fedsynth

#endif  // FEDSYNTH_CORPUS_H_
