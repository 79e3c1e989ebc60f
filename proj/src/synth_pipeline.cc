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

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "absl/strings/str_cat.h"
#include "fedsynth/parallel.h"
#include "fedsynth/random.h"

namespace fedsynth {
namespace {

constexpr std::string_view kWhitespace = " \t\r\n";

std::string_view Trim(std::string_view s) {
  const size_t b = s.find_first_not_of(kWhitespace);
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(kWhitespace) - b + 1);
}

bool IsAlnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

std::string LowerAscii(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string_view StripListMarker(std::string_view line) {
  line = Trim(line);
  size_t digits = 0;
  while (digits < line.size() && std::isdigit(static_cast<unsigned char>(line[digits]))) {
    ++digits;
  }
  if (digits > 0 && digits < line.size() && (line[digits] == '.' || line[digits] == ')')) {
    line.remove_prefix(digits + 1);
  } else if (line.starts_with("-") || (line.starts_with("*") && !line.starts_with("**"))) {
    line.remove_prefix(1);
  } else if (line.starts_with("\xE2\x80\xA2")) {  // U+2022 bullet
    line.remove_prefix(3);
  }
  line = Trim(line);
  if (line.size() >= 4 && line.starts_with("**") && line.ends_with("**")) {
    line = Trim(line.substr(2, line.size() - 4));
  }
  if (line.size() >= 2 && line.front() == '"' && line.back() == '"') {
    line = Trim(line.substr(1, line.size() - 2));
  }
  return line;
}

// Maps a failed job onto the stats bucket it belongs to.
void CountFailure(const absl::Status& s, int64_t* parse_bucket, StageStats* stats) {
  switch (s.code()) {
    case absl::StatusCode::kDataLoss: ++*parse_bucket; break;
    case absl::StatusCode::kFailedPrecondition: ++stats->skipped; break;
    default: ++stats->backend_errors; break;
  }
}

absl::StatusOr<CompletionResponse> Call(const CompletionBackend& backend,
                                        std::string prompt, const SamplingParams& params) {
  return backend.Complete(CompletionRequest{std::move(prompt), params});
}

absl::StatusOr<std::vector<std::string>> GenerateList(const CompletionBackend& backend,
                                                      PromptKind kind,
                                                      const VariableAssignment& a,
                                                      const SamplingParams& params) {
  auto prompt = RenderPrompt(kind, a);
  if (!prompt.ok()) return prompt.status();
  auto response = Call(backend, *std::move(prompt), params);
  if (!response.ok()) return response.status();
  std::vector<std::string> items = ParseList(response->text);
  if (items.empty()) return absl::DataLossError("no list items in response");
  return items;
}

absl::StatusOr<Example> ValidatedChat(const absl::StatusOr<CompletionResponse>& response,
                                      Source source, Meta meta) {
  if (!response.ok()) return response.status();
  if (ParseTurns(response->text).size() < 2) {
    return absl::DataLossError("non-chat output: fewer than two turns");
  }
  return Example::Create(response->text, source, std::move(meta));
}

}  // namespace

nlohmann::json StageStats::ToJson() const {
  return {{"jobs", jobs},         {"kept", kept},
          {"dropped", dropped},   {"unparseable", unparseable},
          {"rejected", rejected}, {"skipped", skipped},
          {"backend_errors", backend_errors}};
}

nlohmann::json PipelineStats::ToJson() const {
  return {{"filter", filter.ToJson()},
          {"receivers", receivers.ToJson()},
          {"topics", topics.ToJson()},
          {"conversations", conversations.ToJson()},
          {"transform", transform.ToJson()},
          {"raw", raw.ToJson()}};
}

std::optional<int> ParseBinaryScore(std::string_view response) {
  for (size_t i = 0; i < response.size(); ++i) {
    const char c = response[i];
    if (c != '0' && c != '1') continue;
    const bool left_ok = i == 0 || !IsAlnum(response[i - 1]);
    const bool right_ok = i + 1 == response.size() || !IsAlnum(response[i + 1]);
    if (left_ok && right_ok) return c - '0';
  }
  return std::nullopt;
}

std::vector<std::string> ParseList(std::string_view response) {
  std::vector<std::string> items;
  size_t pos = 0;
  while (pos <= response.size()) {
    size_t nl = response.find('\n', pos);
    if (nl == std::string_view::npos) nl = response.size();
    std::string_view item = StripListMarker(response.substr(pos, nl - pos));
    if (!item.empty()) items.emplace_back(item);
    pos = nl + 1;
  }
  return DedupPreserveOrder(std::move(items));
}

std::vector<std::string> DedupPreserveOrder(std::vector<std::string> items) {
  std::unordered_set<std::string> seen;
  std::vector<std::string> out;
  for (std::string& item : items) {
    if (seen.insert(LowerAscii(item)).second) out.push_back(std::move(item));
  }
  return out;
}

absl::StatusOr<bool> FilterExample(const CompletionBackend& backend, const Example& ex,
                                   const SamplingParams& params) {
  auto prompt = RenderPrompt(PromptKind::kFilter, ex);
  if (!prompt.ok()) return prompt.status();
  auto response = Call(backend, *std::move(prompt), params);
  if (!response.ok()) return response.status();
  std::optional<int> score = ParseBinaryScore(response->text);
  if (!score) return absl::DataLossError("unparseable_response: no standalone 0/1");
  return *score == 1;
}

absl::StatusOr<std::vector<std::string>> GenerateReceivers(
    const CompletionBackend& backend, const VariableAssignment& a,
    const SamplingParams& params) {
  return GenerateList(backend, PromptKind::kGenReceivers, a, params);
}

absl::StatusOr<std::vector<std::string>> GenerateTopics(
    const CompletionBackend& backend, const VariableAssignment& a,
    const SamplingParams& params) {
  if (!a.receiver) {
    return absl::FailedPreconditionError("topics require a receiver");
  }
  return GenerateList(backend, PromptKind::kGenTopics, a, params);
}

absl::StatusOr<Example> GenerateConversation(const CompletionBackend& backend,
                                             const VariableAssignment& a,
                                             const SamplingParams& params) {
  if (!a.receiver || !a.topic) {
    return absl::FailedPreconditionError("conversation requires receiver and topic");
  }
  auto prompt = RenderPrompt(PromptKind::kGenConversation, a);
  if (!prompt.ok()) return prompt.status();
  return ValidatedChat(Call(backend, *std::move(prompt), params), Source::kGeneratedChat,
                       a.ToMeta());
}

absl::StatusOr<Example> TransformExample(const CompletionBackend& backend,
                                         const Example& ex,
                                         const SamplingParams& params) {
  if (ex.source() != Source::kFiltered) {
    return absl::FailedPreconditionError("transform expects a filtered example");
  }
  if (Trim(ex.text()).empty()) return absl::FailedPreconditionError("empty article");
  auto prompt = RenderPrompt(PromptKind::kTransform, ex);
  if (!prompt.ok()) return prompt.status();
  Meta meta;
  if (auto it = ex.meta().find("id"); it != ex.meta().end()) meta["source_id"] = it->second;
  return ValidatedChat(Call(backend, *std::move(prompt), params), Source::kTransformed,
                       std::move(meta));
}

SynthResult GenerateChats(const CompletionBackend& backend, const VariableSets& sets,
                          const GenerationOptions& options) {
  SynthResult result;
  PipelineStats& stats = result.stats;

  std::vector<size_t> grid(sets.GridSize());
  std::iota(grid.begin(), grid.end(), 0);
  Rng rng = MakeRng(options.seed, StreamTag::kSynthesis);
  std::shuffle(grid.begin(), grid.end(), rng);
  grid.resize(std::min(grid.size(), options.max_assignments));
  std::sort(grid.begin(), grid.end());

  // Stage 1: receivers per assignment.
  std::vector<VariableAssignment> base;
  for (size_t idx : grid) base.push_back(sets.At(idx));
  std::vector<absl::StatusOr<std::vector<std::string>>> receivers(
      base.size(), absl::UnknownError("not run"));
  ParallelFor(base.size(), options.workers, [&](size_t i) {
    receivers[i] = GenerateReceivers(backend, base[i], options.sampling);
  });
  std::vector<VariableAssignment> with_receiver;
  for (size_t i = 0; i < base.size(); ++i) {
    ++stats.receivers.jobs;
    if (!receivers[i].ok()) {
      CountFailure(receivers[i].status(), &stats.receivers.unparseable, &stats.receivers);
      continue;
    }
    if (receivers[i]->empty()) {
      ++stats.receivers.unparseable;
      continue;
    }
    ++stats.receivers.kept;
    const size_t n = std::min<size_t>(receivers[i]->size(), std::max(0, options.max_receivers));
    for (size_t r = 0; r < n; ++r) {
      VariableAssignment a = base[i];
      a.receiver = (*receivers[i])[r];
      with_receiver.push_back(std::move(a));
    }
  }

  // Stage 2: topics per (assignment, receiver).
  std::vector<absl::StatusOr<std::vector<std::string>>> topics(
      with_receiver.size(), absl::UnknownError("not run"));
  ParallelFor(with_receiver.size(), options.workers, [&](size_t i) {
    topics[i] = GenerateTopics(backend, with_receiver[i], options.sampling);
  });
  std::vector<VariableAssignment> jobs;
  for (size_t i = 0; i < with_receiver.size(); ++i) {
    ++stats.topics.jobs;
    if (!topics[i].ok()) {
      CountFailure(topics[i].status(), &stats.topics.unparseable, &stats.topics);
      continue;
    }
    if (topics[i]->empty()) {
      ++stats.topics.unparseable;
      continue;
    }
    ++stats.topics.kept;
    const size_t n = std::min<size_t>(topics[i]->size(), std::max(0, options.max_topics));
    for (size_t t = 0; t < n; ++t) {
      VariableAssignment a = with_receiver[i];
      a.topic = (*topics[i])[t];
      jobs.push_back(std::move(a));
    }
  }

  // Stage 3: conversations.
  std::vector<absl::StatusOr<Example>> chats(jobs.size(), absl::UnknownError("not run"));
  ParallelFor(jobs.size(), options.workers, [&](size_t i) {
    chats[i] = GenerateConversation(backend, jobs[i], options.sampling);
  });
  for (size_t i = 0; i < jobs.size(); ++i) {
    ++stats.conversations.jobs;
    if (!chats[i].ok()) {
      CountFailure(chats[i].status(), &stats.conversations.rejected, &stats.conversations);
      continue;
    }
    ++stats.conversations.kept;
    Meta meta = chats[i]->meta();
    const std::string id = absl::StrCat(options.id_prefix, "-", result.corpus.size());
    meta["id"] = id;
    meta["conv_id"] = id;
    result.corpus.push_back(*Example::Create(chats[i]->text(), options.source, std::move(meta)));
  }
  return result;
}

SynthResult RunFilter(const CompletionBackend& backend, std::span<const Example> corpus,
                      const SamplingParams& params, int workers) {
  SynthResult result;
  StageStats& stats = result.stats.filter;
  std::vector<absl::StatusOr<bool>> verdicts(corpus.size(), absl::UnknownError("not run"));
  ParallelFor(corpus.size(), workers, [&](size_t i) {
    verdicts[i] = FilterExample(backend, corpus[i], params);
  });
  for (size_t i = 0; i < corpus.size(); ++i) {
    ++stats.jobs;
    if (!verdicts[i].ok()) {
      CountFailure(verdicts[i].status(), &stats.unparseable, &stats);
      continue;
    }
    if (!*verdicts[i]) {
      ++stats.dropped;
      continue;
    }
    ++stats.kept;
    Meta meta = corpus[i].meta();
    if (!meta.contains("id")) meta["id"] = absl::StrCat("doc-", i);
    result.corpus.push_back(*Example::Create(corpus[i].text(), Source::kFiltered, std::move(meta)));
  }
  return result;
}

std::vector<size_t> SelectForTransform(size_t n, double fraction, uint64_t seed) {
  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng = MakeRng(seed, StreamTag::kSynthesis, {0x7472616eULL});
  std::shuffle(idx.begin(), idx.end(), rng);
  const double f = std::clamp(fraction, 0.0, 1.0);
  idx.resize(static_cast<size_t>(std::llround(f * static_cast<double>(n))));
  std::sort(idx.begin(), idx.end());
  return idx;
}

SynthResult RunTransform(const CompletionBackend& backend,
                         std::span<const Example> filtered, double fraction,
                         uint64_t seed, const SamplingParams& params, int workers) {
  SynthResult result;
  StageStats& stats = result.stats.transform;
  const std::vector<size_t> chosen = SelectForTransform(filtered.size(), fraction, seed);
  std::vector<absl::StatusOr<Example>> outputs(chosen.size(), absl::UnknownError("not run"));
  ParallelFor(chosen.size(), workers, [&](size_t i) {
    outputs[i] = TransformExample(backend, filtered[chosen[i]], params);
  });
  for (size_t i = 0; i < chosen.size(); ++i) {
    ++stats.jobs;
    if (!outputs[i].ok()) {
      CountFailure(outputs[i].status(), &stats.rejected, &stats);
      continue;
    }
    ++stats.kept;
    Meta meta = outputs[i]->meta();
    if (!meta.contains("source_id")) meta["source_id"] = absl::StrCat("doc-", chosen[i]);
    const std::string id = absl::StrCat("transformed-", result.corpus.size());
    meta["id"] = id;
    meta["conv_id"] = id;
    result.corpus.push_back(*Example::Create(outputs[i]->text(), Source::kTransformed,
                                             std::move(meta)));
  }
  return result;
}

SynthResult GenerateRaw(const CompletionBackend& backend, size_t count,
                        const SamplingParams& params, int workers) {
  SynthResult result;
  StageStats& stats = result.stats.raw;
  std::vector<absl::StatusOr<CompletionResponse>> outputs(count, absl::UnknownError("not run"));
  ParallelFor(count, workers, [&](size_t i) {
    outputs[i] = Call(backend, absl::StrCat("Write a paragraph of web text. Document #", i, "."),
                      params);
  });
  for (size_t i = 0; i < count; ++i) {
    ++stats.jobs;
    if (!outputs[i].ok()) {
      CountFailure(outputs[i].status(), &stats.rejected, &stats);
      continue;
    }
    auto ex = Example::Create(outputs[i]->text, Source::kRaw,
                              {{"id", absl::StrCat("doc-", result.corpus.size())}});
    if (!ex.ok()) {
      ++stats.rejected;
      continue;
    }
    ++stats.kept;
    result.corpus.push_back(*std::move(ex));
  }
  return result;
}

Corpus Combine(std::span<const Corpus> corpora, std::span<const double> ratios) {
  Corpus out;
  for (size_t c = 0; c < corpora.size(); ++c) {
    size_t take = corpora[c].size();
    if (c < ratios.size()) {
      take = std::min(take, static_cast<size_t>(std::llround(
                                std::clamp(ratios[c], 0.0, 1.0) *
                                static_cast<double>(corpora[c].size()))));
    }
    out.insert(out.end(), corpora[c].begin(), corpora[c].begin() + static_cast<ptrdiff_t>(take));
  }
  return out;
}

Corpus PreprocessForTraining(std::span<const Example> corpus) {
  Corpus out;
  for (const Example& ex : corpus) {
    Meta meta = ex.meta();
    if (auto it = meta.find("id"); it != meta.end()) {
      meta["parent_id"] = it->second;
      meta.erase("id");
    }
    const bool chat = ex.source() == Source::kGeneratedChat ||
                      ex.source() == Source::kTransformed ||
                      ex.source() == Source::kPrivateSim;
    std::vector<Example> parts = chat ? SplitTurns(ex.text(), ex.source(), meta)
                                      : SplitSentences(ex.text(), ex.source(), meta);
    for (Example& part : parts) out.push_back(std::move(part));
  }
  return out;
}

}  // namespace fedsynth
