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
#include <chrono>
#include <regex>
#include <thread>

#include "absl/strings/str_cat.h"
#include "fedsynth/llm_backend.h"
#include "httplib.h"
#include "json.hpp"

namespace fedsynth {
namespace {

class RemoteBackend : public CompletionBackend {
 public:
  explicit RemoteBackend(RemoteConfig config) : config_(std::move(config)) {
    static const std::regex kUrl(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (std::regex_match(config_.url, m, kUrl)) {
      origin_ = m[1];
      path_ = m[2].matched ? std::string(m[2]) : "/";
    }
  }

  absl::StatusOr<CompletionResponse> Complete(
      const CompletionRequest& request) const override {
    if (origin_.empty()) {
      return absl::InvalidArgumentError("remote backend url is not http(s): " + config_.url);
    }
    if (absl::Status s = request.params.Validate(); !s.ok()) return s;

    const nlohmann::json body = {{"prompt", request.prompt},
                                 {"top_k", request.params.top_k},
                                 {"temperature", request.params.temperature},
                                 {"max_tokens", request.params.max_tokens}};
    const std::string payload = body.dump();
    httplib::Headers headers;
    if (!config_.auth_value.empty()) headers.emplace(config_.auth_header, config_.auth_value);

    absl::Status last = absl::UnavailableError("backend_unavailable: no attempt made");
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
      if (attempt > 0) {
        std::this_thread::sleep_for(
            std::chrono::milliseconds(static_cast<int64_t>(config_.backoff_ms) << (attempt - 1)));
      }
      httplib::Client client(origin_);
      const auto timeout = std::chrono::milliseconds(config_.timeout_ms);
      client.set_connection_timeout(timeout);
      client.set_read_timeout(timeout);
      client.set_write_timeout(timeout);
      auto res = client.Post(path_, headers, payload, "application/json");
      if (!res) {
        last = absl::UnavailableError(
            absl::StrCat("backend_unavailable: ", httplib::to_string(res.error())));
        continue;
      }
      if (res->status == 429) {
        last = absl::ResourceExhaustedError("rate_limited: HTTP 429");
        continue;
      }
      if (res->status >= 500) {
        last = absl::UnavailableError(absl::StrCat("backend_unavailable: HTTP ", res->status));
        continue;
      }
      if (res->status != 200) {
        return absl::FailedPreconditionError(absl::StrCat("backend rejected request: HTTP ",
                                                          res->status));
      }
      return Parse(res->body);
    }
    return last;
  }

  std::string Name() const override { return "remote"; }

 private:
  static absl::StatusOr<CompletionResponse> Parse(const std::string& body) {
    nlohmann::json j = nlohmann::json::parse(body, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded() || !j.is_object() || !j.contains("text") || !j["text"].is_string()) {
      return absl::DataLossError("malformed_response: expected {\"text\": string}");
    }
    CompletionResponse out;
    out.text = j["text"].get<std::string>();
    if (j.contains("finish_reason") && j["finish_reason"] == "length") {
      out.finish = FinishReason::kLength;
    } else if (out.text.empty()) {
      out.finish = FinishReason::kRefusal;
    }
    return out;
  }

  RemoteConfig config_;
  std::string origin_;
  std::string path_;
};

}  // namespace

std::unique_ptr<CompletionBackend> MakeRemoteBackend(RemoteConfig config) {
  return std::make_unique<RemoteBackend>(std::move(config));
}

}  // namespace fedsynth
