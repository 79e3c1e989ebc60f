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
// Text-completion backends: a deterministic mock language generator, a
// replay backend for recorded responses, and a JSON-over-HTTP client.

#ifndef FEDSYNTH_LLM_BACKEND_H_
#define FEDSYNTH_LLM_BACKEND_H_

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "fedsynth/random.h"

namespace fedsynth {

struct SamplingParams {
  int top_k = 40;
  double temperature = 0.2;
  int max_tokens = 256;
  uint64_t seed = 0;  // honored by the mock only

  absl::Status Validate() const;
};

struct CompletionRequest {
  std::string prompt;
  SamplingParams params;
};

enum class FinishReason { kStop, kLength, kRefusal };

struct CompletionResponse {
  std::string text;
  FinishReason finish = FinishReason::kStop;
};

// Implementations must be safe for concurrent Complete() calls.
//
// Error codes: kUnavailable (backend_unavailable), kResourceExhausted
// (rate_limited after retries), kDataLoss (malformed_response).
class CompletionBackend {
 public:
  virtual ~CompletionBackend() = default;
  virtual absl::StatusOr<CompletionResponse> Complete(
      const CompletionRequest& request) const = 0;
  virtual std::string Name() const = 0;
};

// Top-k / temperature sampling over unnormalized logits. Only the k largest
// logits are eligible; temperature 0 picks the argmax (lowest index on ties).
size_t TopKSample(std::span<const double> logits, int top_k, double temperature,
                  Rng& rng);

enum class MockStyle { kChatLike, kWebLike };

std::string_view MockStyleName(MockStyle style);
absl::StatusOr<MockStyle> ParseMockStyle(std::string_view name);

struct MockProfile {
  MockStyle style = MockStyle::kChatLike;
  // 0: chat and web content words are disjoint; 1: both styles draw content
  // words from the same distribution.
  double vocab_skew = 0.5;
  uint64_t seed = 0;
  // Log-normal perturbation of word frequencies; lets two profiles of the
  // same style differ slightly (e.g. synthetic chat vs simulated users).
  double jitter = 0.0;
};

std::unique_ptr<CompletionBackend> MakeMockBackend(const MockProfile& profile);

// Shorthand for a mock with the given style and overlap.
std::unique_ptr<CompletionBackend> MockProfileBackend(MockStyle style,
                                                      double vocab_skew);

// Replays responses keyed by SHA-256 of the prompt. Fixture file:
//   {"version": 1, "entries": [{"prompt_sha256": "...", "response": "..."}]}
// An entry may carry "prompt" instead of the hash. Unknown prompts fail
// with kNotFound.
class RecordedBackend : public CompletionBackend {
 public:
  explicit RecordedBackend(std::map<std::string, std::string> by_hash)
      : by_hash_(std::move(by_hash)) {}
  static absl::StatusOr<std::unique_ptr<RecordedBackend>> Load(const std::string& path);

  absl::StatusOr<CompletionResponse> Complete(
      const CompletionRequest& request) const override;
  std::string Name() const override { return "recorded"; }

 private:
  std::map<std::string, std::string> by_hash_;
};

struct RemoteConfig {
  std::string url;                       // e.g. http://localhost:8080/v1/complete
  std::string auth_header = "Authorization";
  std::string auth_value;                // empty: no auth header
  int timeout_ms = 30000;
  int max_retries = 3;
  int backoff_ms = 500;                  // doubled after every retry
};

// POST {"prompt","top_k","temperature","max_tokens"} -> {"text"}.
// Connection failures, 5xx and 429 are retried up to max_retries times.
std::unique_ptr<CompletionBackend> MakeRemoteBackend(RemoteConfig config);

}  // namespace fedsynth

#endif  // FEDSYNTH_LLM_BACKEND_H_
