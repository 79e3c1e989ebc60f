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
// The three synthesis paths (filter public text, chained chat generation,
// article-to-chat transformation) plus list parsing, dedup and corpus
// combination. Every backend job is accounted for in StageStats.

#ifndef FEDSYNTH_SYNTH_PIPELINE_H_
#define FEDSYNTH_SYNTH_PIPELINE_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "absl/status/statusor.h"
#include "fedsynth/corpus.h"
#include "fedsynth/llm_backend.h"
#include "fedsynth/prompts.h"
#include "json.hpp"

namespace fedsynth {

// jobs == kept + dropped + unparseable + rejected + skipped + backend_errors.
struct StageStats {
  int64_t jobs = 0;
  int64_t kept = 0;
  int64_t dropped = 0;
  int64_t unparseable = 0;
  int64_t rejected = 0;
  int64_t skipped = 0;
  int64_t backend_errors = 0;

  bool Balanced() const {
    return jobs == kept + dropped + unparseable + rejected + skipped + backend_errors;
  }
  nlohmann::json ToJson() const;
};

struct PipelineStats {
  StageStats filter;
  StageStats receivers;
  StageStats topics;
  StageStats conversations;
  StageStats transform;
  StageStats raw;

  nlohmann::json ToJson() const;
};

// First '0' or '1' not adjacent to another letter or digit.
std::optional<int> ParseBinaryScore(std::string_view response);

// Splits on newlines, strips list markers ("1.", "2)", "-", "*", "•") and
// surrounding quotes/bold, then dedups.
std::vector<std::string> ParseList(std::string_view response);

// Keeps the first occurrence of each item, comparing case-insensitively.
std::vector<std::string> DedupPreserveOrder(std::vector<std::string> items);

// kDataLoss when the response has no standalone 0/1.
absl::StatusOr<bool> FilterExample(const CompletionBackend& backend, const Example& ex,
                                   const SamplingParams& params);

absl::StatusOr<std::vector<std::string>> GenerateReceivers(
    const CompletionBackend& backend, const VariableAssignment& a,
    const SamplingParams& params);

// Requires a.receiver.
absl::StatusOr<std::vector<std::string>> GenerateTopics(
    const CompletionBackend& backend, const VariableAssignment& a,
    const SamplingParams& params);

// Requires receiver and topic. Output with fewer than two turns is rejected
// with kDataLoss.
absl::StatusOr<Example> GenerateConversation(const CompletionBackend& backend,
                                             const VariableAssignment& a,
                                             const SamplingParams& params);

// Requires ex.source() == kFiltered.
absl::StatusOr<Example> TransformExample(const CompletionBackend& backend,
                                         const Example& ex,
                                         const SamplingParams& params);

struct SynthResult {
  Corpus corpus;
  PipelineStats stats;
};

struct GenerationOptions {
  size_t max_assignments = 100;  // sampled from the variable grid
  int max_receivers = 2;         // per assignment, after dedup
  int max_topics = 2;            // per receiver, after dedup
  SamplingParams sampling;
  uint64_t seed = 0;
  int workers = 1;
  Source source = Source::kGeneratedChat;
  std::string id_prefix = "chat";
};

// Receivers -> topics -> conversations, each stage fanned out over workers.
// Output order follows (assignment index, receiver index, topic index).
SynthResult GenerateChats(const CompletionBackend& backend, const VariableSets& sets,
                          const GenerationOptions& options);

SynthResult RunFilter(const CompletionBackend& backend, std::span<const Example> corpus,
                      const SamplingParams& params, int workers);

// Indices (ascending) of round(fraction * n) examples chosen uniformly.
std::vector<size_t> SelectForTransform(size_t n, double fraction, uint64_t seed);

SynthResult RunTransform(const CompletionBackend& backend,
                         std::span<const Example> filtered, double fraction,
                         uint64_t seed, const SamplingParams& params, int workers);

// Free-form style-native documents, tagged kRaw (a stand-in public corpus).
SynthResult GenerateRaw(const CompletionBackend& backend, size_t count,
                        const SamplingParams& params, int workers);

// Concatenation in input order. ratios, when given, keeps the first
// round(ratio * |corpus|) examples of each input.
Corpus Combine(std::span<const Corpus> corpora, std::span<const double> ratios = {});

// Turn-level examples for chat sources, sentence-level for the rest.
Corpus PreprocessForTraining(std::span<const Example> corpus);

}  // namespace fedsynth

#endif  // FEDSYNTH_SYNTH_PIPELINE_H_
