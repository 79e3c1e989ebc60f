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
#include "fedsynth/llm_backend.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "fedsynth/hash.h"
#include "json.hpp"

namespace fedsynth {

absl::Status SamplingParams::Validate() const {
  if (top_k < 1) return absl::InvalidArgumentError("top_k must be >= 1");
  if (!(temperature >= 0.0)) return absl::InvalidArgumentError("temperature must be >= 0");
  if (max_tokens < 1) return absl::InvalidArgumentError("max_tokens must be >= 1");
  return absl::OkStatus();
}

size_t TopKSample(std::span<const double> logits, int top_k, double temperature,
                  Rng& rng) {
  std::vector<size_t> order(logits.size());
  std::iota(order.begin(), order.end(), 0);
  const size_t k = std::min<size_t>(order.size(), static_cast<size_t>(std::max(1, top_k)));
  std::partial_sort(order.begin(), order.begin() + k, order.end(),
                    [&](size_t a, size_t b) {
                      return logits[a] != logits[b] ? logits[a] > logits[b] : a < b;
                    });
  order.resize(k);
  if (temperature <= 0.0 || k == 1) return order.front();

  const double max_logit = logits[order.front()];
  std::vector<double> cdf(k);
  double total = 0.0;
  for (size_t i = 0; i < k; ++i) {
    total += std::exp((logits[order[i]] - max_logit) / temperature);
    cdf[i] = total;
  }
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53 * total;
  const size_t pick = std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin();
  return order[std::min(pick, k - 1)];
}

std::string_view MockStyleName(MockStyle style) {
  return style == MockStyle::kChatLike ? "chat_like" : "web_like";
}

absl::StatusOr<MockStyle> ParseMockStyle(std::string_view name) {
  if (name == "chat_like") return MockStyle::kChatLike;
  if (name == "web_like") return MockStyle::kWebLike;
  return absl::InvalidArgumentError("unknown mock style: " + std::string(name));
}

absl::StatusOr<std::unique_ptr<RecordedBackend>> RecordedBackend::Load(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) return absl::NotFoundError("cannot open fixture " + path);
  nlohmann::json j = nlohmann::json::parse(in, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object() || !j.contains("entries") ||
      !j["entries"].is_array()) {
    return absl::InvalidArgumentError("fixture must be an object with an entries array");
  }
  if (j.value("version", 0) != 1) return absl::InvalidArgumentError("fixture version must be 1");
  std::map<std::string, std::string> by_hash;
  for (const auto& e : j["entries"]) {
    if (!e.contains("response") || !e["response"].is_string()) {
      return absl::InvalidArgumentError("fixture entry without string response");
    }
    std::string key;
    if (e.contains("prompt_sha256") && e["prompt_sha256"].is_string()) {
      key = e["prompt_sha256"].get<std::string>();
    } else if (e.contains("prompt") && e["prompt"].is_string()) {
      key = Sha256Hex(e["prompt"].get<std::string>());
    } else {
      return absl::InvalidArgumentError("fixture entry needs prompt or prompt_sha256");
    }
    by_hash[key] = e["response"].get<std::string>();
  }
  return std::make_unique<RecordedBackend>(std::move(by_hash));
}

absl::StatusOr<CompletionResponse> RecordedBackend::Complete(
    const CompletionRequest& request) const {
  auto it = by_hash_.find(Sha256Hex(request.prompt));
  if (it == by_hash_.end()) {
    return absl::NotFoundError("no recorded response for prompt");
  }
  return CompletionResponse{it->second, FinishReason::kStop};
}

}  // namespace fedsynth
