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

#include <atomic>
#include <cmath>
#include <map>
#include <set>
#include <thread>

#include "fedsynth/corpus.h"
#include "fedsynth/hash.h"
#include "fedsynth/mock_language.h"
#include "fedsynth/prompts.h"
#include "fedsynth/synth_pipeline.h"
#include "gtest/gtest.h"
#include "httplib.h"
#include "json.hpp"
#include "test_support.h"

namespace fedsynth {
namespace {

using ::fedsynth::testing::ScratchDir;

VariableAssignment SomeAssignment() {
  VariableSets sets = VariableSets::Default();
  return sets.At(12345);
}

TEST(SamplingParamsTest, Validate) {
  EXPECT_TRUE(SamplingParams{}.Validate().ok());
  EXPECT_FALSE((SamplingParams{.top_k = 0}).Validate().ok());
  EXPECT_FALSE((SamplingParams{.temperature = -0.1}).Validate().ok());
  EXPECT_FALSE((SamplingParams{.max_tokens = 0}).Validate().ok());
}

TEST(TopKSampleTest, ZeroTemperatureIsArgmaxLowestIndex) {
  Rng rng(1);
  const std::vector<double> logits = {0.5, 2.0, 2.0, -1.0};
  for (int i = 0; i < 20; ++i) EXPECT_EQ(TopKSample(logits, 4, 0.0, rng), 1u);
  EXPECT_EQ(TopKSample(logits, 1, 1.0, rng), 1u);
}

TEST(TopKSampleTest, OnlyTopKAndSoftmaxFrequencies) {
  Rng rng(7);
  const std::vector<double> logits = {1.0, 3.0, 0.0, 2.0, -5.0};
  const double temp = 0.8;
  std::vector<int> counts(logits.size(), 0);
  const int n = 200000;
  for (int i = 0; i < n; ++i) ++counts[TopKSample(logits, 3, temp, rng)];
  EXPECT_EQ(counts[2], 0);
  EXPECT_EQ(counts[4], 0);
  // Eligible: ids 1, 3, 0.
  const double z = std::exp(3.0 / temp) + std::exp(2.0 / temp) + std::exp(1.0 / temp);
  EXPECT_NEAR(counts[1] / double(n), std::exp(3.0 / temp) / z, 0.01);
  EXPECT_NEAR(counts[3] / double(n), std::exp(2.0 / temp) / z, 0.01);
  EXPECT_NEAR(counts[0] / double(n), std::exp(1.0 / temp) / z, 0.01);
}

TEST(MockBackendTest, DeterministicPerPromptAndSeed) {
  auto backend = MockProfileBackend(MockStyle::kChatLike, 0.5);
  CompletionRequest req{*RenderPrompt(PromptKind::kGenReceivers, SomeAssignment()), {}};
  auto a = backend->Complete(req);
  auto b = backend->Complete(req);
  ASSERT_TRUE(a.ok() && b.ok());
  EXPECT_EQ(a->text, b->text);
  req.params.seed = 99;
  auto c = backend->Complete(req);
  ASSERT_TRUE(c.ok());
  EXPECT_NE(a->text, c->text);
}

TEST(MockBackendTest, ConcurrentCallsMatchSerial) {
  auto backend = MockProfileBackend(MockStyle::kWebLike, 0.5);
  std::vector<std::string> prompts;
  for (int i = 0; i < 64; ++i) prompts.push_back("write something " + std::to_string(i));
  std::vector<std::string> serial;
  for (const auto& p : prompts) serial.push_back(backend->Complete({p, {}})->text);
  std::vector<std::string> parallel(prompts.size());
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&, t] {
      for (size_t i = t; i < prompts.size(); i += 4) {
        parallel[i] = backend->Complete({prompts[i], {}})->text;
      }
    });
  }
  for (auto& th : threads) th.join();
  EXPECT_EQ(parallel, serial);
}

TEST(MockBackendTest, ResponsesParseForEveryFamily) {
  for (MockStyle style : {MockStyle::kChatLike, MockStyle::kWebLike}) {
    auto backend = MockProfileBackend(style, 0.5);
    for (uint64_t seed = 0; seed < 50; ++seed) {
      SamplingParams p;
      p.seed = seed;
      VariableAssignment a = SomeAssignment();
      auto receivers = backend->Complete({*RenderPrompt(PromptKind::kGenReceivers, a), p});
      ASSERT_TRUE(receivers.ok());
      EXPECT_GE(ParseList(receivers->text).size(), 1u);
      std::vector<std::string> raw_lines;
      for (const auto& item : ParseList(receivers->text)) raw_lines.push_back(item);
      a.receiver = raw_lines.front();
      auto topics = backend->Complete({*RenderPrompt(PromptKind::kGenTopics, a), p});
      ASSERT_TRUE(topics.ok());
      ASSERT_FALSE(ParseList(topics->text).empty());
      a.topic = ParseList(topics->text).front();
      auto conv = backend->Complete({*RenderPrompt(PromptKind::kGenConversation, a), p});
      ASSERT_TRUE(conv.ok());
      EXPECT_GE(ParseTurns(conv->text).size(), 2u);

      auto article = Example::Create("We went to the lake and the weather was great.",
                                     Source::kFiltered);
      auto filt = backend->Complete({*RenderPrompt(PromptKind::kFilter, *article), p});
      ASSERT_TRUE(filt.ok());
      EXPECT_TRUE(ParseBinaryScore(filt->text).has_value()) << filt->text;
      const bool has0 = filt->text.find('0') != std::string::npos;
      const bool has1 = filt->text.find('1') != std::string::npos;
      EXPECT_NE(has0, has1) << filt->text;

      auto tr = backend->Complete({*RenderPrompt(PromptKind::kTransform, *article), p});
      ASSERT_TRUE(tr.ok());
      EXPECT_GE(ParseTurns(tr->text).size(), 2u);
    }
  }
}

TEST(MockBackendTest, ReceiverListHasAtLeastThreeEntries) {
  auto backend = MockProfileBackend(MockStyle::kChatLike, 0.5);
  for (uint64_t seed = 0; seed < 100; ++seed) {
    SamplingParams p;
    p.seed = seed;
    auto r = backend->Complete({*RenderPrompt(PromptKind::kGenReceivers, SomeAssignment()), p});
    ASSERT_TRUE(r.ok());
    int lines = 0;
    for (char c : r->text) lines += c == '\n';
    EXPECT_GE(lines, 3);
  }
}

TEST(MockBackendTest, MaxTokensTruncates) {
  auto backend = MockProfileBackend(MockStyle::kWebLike, 0.5);
  SamplingParams p;
  p.max_tokens = 3;
  auto r = backend->Complete({"tell me a story", p});
  ASSERT_TRUE(r.ok());
  EXPECT_EQ(r->finish, FinishReason::kLength);
  EXPECT_LE(SplitWords(r->text).size(), 3u);
}

std::map<std::string, double> Unigrams(const CompletionBackend& backend, int samples) {
  std::map<std::string, double> counts;
  double total = 0;
  for (int i = 0; i < samples; ++i) {
    SamplingParams p;
    p.seed = static_cast<uint64_t>(i);
    for (const std::string& w : SplitWords(backend.Complete({"free text", p})->text)) {
      counts[w] += 1;
      total += 1;
    }
  }
  for (auto& [w, c] : counts) c /= total;
  return counts;
}

double JensenShannon(const std::map<std::string, double>& p,
                     const std::map<std::string, double>& q) {
  std::set<std::string> keys;
  for (const auto& [w, _] : p) keys.insert(w);
  for (const auto& [w, _] : q) keys.insert(w);
  double js = 0;
  for (const std::string& w : keys) {
    const double a = p.contains(w) ? p.at(w) : 0.0;
    const double b = q.contains(w) ? q.at(w) : 0.0;
    const double m = 0.5 * (a + b);
    if (a > 0) js += 0.5 * a * std::log(a / m);
    if (b > 0) js += 0.5 * b * std::log(b / m);
  }
  return js;
}

TEST(MockProfileTest, DivergenceShrinksWithSkew) {
  double prev = 1e9;
  for (double skew : {0.0, 0.5, 1.0}) {
    auto chat = MockProfileBackend(MockStyle::kChatLike, skew);
    auto web = MockProfileBackend(MockStyle::kWebLike, skew);
    const double js = JensenShannon(Unigrams(*chat, 300), Unigrams(*web, 300));
    EXPECT_LT(js, prev) << "skew " << skew;
    prev = js;
  }
}

TEST(MockProfileTest, NoSharedContentWordsAtZeroSkew) {
  auto chat = MockProfileBackend(MockStyle::kChatLike, 0.0);
  auto web = MockProfileBackend(MockStyle::kWebLike, 0.0);
  for (const auto& [w, _] : Unigrams(*chat, 300)) EXPECT_FALSE(IsWebContentWord(w)) << w;
  for (const auto& [w, _] : Unigrams(*web, 300)) EXPECT_FALSE(IsChatContentWord(w)) << w;
}

TEST(RecordedBackendTest, LoadsByPromptOrHash) {
  ScratchDir dir("recorded");
  nlohmann::json fixture = {
      {"version", 1},
      {"entries",
       {{{"prompt", "alpha"}, {"response", "A"}},
        {{"prompt_sha256", Sha256Hex("beta")}, {"response", "B"}}}}};
  testing::WriteAll(dir.File("f.json"), fixture.dump());
  auto backend = RecordedBackend::Load(dir.File("f.json"));
  ASSERT_TRUE(backend.ok()) << backend.status();
  EXPECT_EQ((*backend)->Complete({"alpha", {}})->text, "A");
  EXPECT_EQ((*backend)->Complete({"beta", {}})->text, "B");
  auto missing = (*backend)->Complete({"gamma", {}});
  ASSERT_FALSE(missing.ok());
  EXPECT_EQ(missing.status().code(), absl::StatusCode::kNotFound);
}

TEST(RecordedBackendTest, RejectsBadFixture) {
  ScratchDir dir("recorded_bad");
  testing::WriteAll(dir.File("f.json"), "{\"version\": 2, \"entries\": []}");
  EXPECT_FALSE(RecordedBackend::Load(dir.File("f.json")).ok());
  testing::WriteAll(dir.File("g.json"), "not json");
  EXPECT_FALSE(RecordedBackend::Load(dir.File("g.json")).ok());
}

class RemoteBackendTest : public ::testing::Test {
 protected:
  void SetUp() override {
    server_.Post("/ok", [this](const httplib::Request& req, httplib::Response& res) {
      last_body_ = nlohmann::json::parse(req.body);
      last_auth_ = req.get_header_value("X-Key");
      res.set_content(R"({"text": "hello back"})", "application/json");
    });
    server_.Post("/flaky", [this](const httplib::Request&, httplib::Response& res) {
      if (flaky_calls_++ < 2) {
        res.status = 503;
        return;
      }
      res.set_content(R"({"text": "finally"})", "application/json");
    });
    server_.Post("/limited", [this](const httplib::Request&, httplib::Response& res) {
      ++limited_calls_;
      res.status = 429;
    });
    server_.Post("/garbage", [](const httplib::Request&, httplib::Response& res) {
      res.set_content("<html>nope</html>", "text/html");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  void TearDown() override {
    server_.stop();
    thread_.join();
  }

  RemoteConfig Config(const std::string& path) const {
    RemoteConfig c;
    c.url = "http://127.0.0.1:" + std::to_string(port_) + path;
    c.timeout_ms = 2000;
    c.max_retries = 3;
    c.backoff_ms = 1;
    return c;
  }

  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  nlohmann::json last_body_;
  std::string last_auth_;
  std::atomic<int> flaky_calls_{0};
  std::atomic<int> limited_calls_{0};
};

TEST_F(RemoteBackendTest, SendsWireFormatAndAuth) {
  RemoteConfig c = Config("/ok");
  c.auth_header = "X-Key";
  c.auth_value = "secret";
  auto backend = MakeRemoteBackend(c);
  SamplingParams p;
  p.top_k = 40;
  p.temperature = 0.2;
  p.max_tokens = 64;
  auto r = backend->Complete({"hi", p});
  ASSERT_TRUE(r.ok()) << r.status();
  EXPECT_EQ(r->text, "hello back");
  EXPECT_EQ(last_body_["prompt"], "hi");
  EXPECT_EQ(last_body_["top_k"], 40);
  EXPECT_DOUBLE_EQ(last_body_["temperature"].get<double>(), 0.2);
  EXPECT_EQ(last_body_["max_tokens"], 64);
  EXPECT_EQ(last_auth_, "secret");
}

TEST_F(RemoteBackendTest, RetriesServerErrors) {
  auto r = MakeRemoteBackend(Config("/flaky"))->Complete({"hi", {}});
  ASSERT_TRUE(r.ok()) << r.status();
  EXPECT_EQ(r->text, "finally");
  EXPECT_EQ(flaky_calls_.load(), 3);
}

TEST_F(RemoteBackendTest, RateLimitSurfacesAfterRetries) {
  auto r = MakeRemoteBackend(Config("/limited"))->Complete({"hi", {}});
  ASSERT_FALSE(r.ok());
  EXPECT_EQ(r.status().code(), absl::StatusCode::kResourceExhausted);
  EXPECT_EQ(limited_calls_.load(), 4);
}

TEST_F(RemoteBackendTest, MalformedResponse) {
  auto r = MakeRemoteBackend(Config("/garbage"))->Complete({"hi", {}});
  ASSERT_FALSE(r.ok());
  EXPECT_EQ(r.status().code(), absl::StatusCode::kDataLoss);
}

TEST(RemoteBackendNoServerTest, UnavailableWhenNothingListens) {
  httplib::Server probe;
  const int port = probe.bind_to_any_port("127.0.0.1");
  probe.stop();  // releases the port; nothing listens there now
  RemoteConfig c;
  c.url = "http://127.0.0.1:" + std::to_string(port) + "/x";
  c.timeout_ms = 500;
  c.max_retries = 1;
  c.backoff_ms = 1;
  auto r = MakeRemoteBackend(c)->Complete({"hi", {}});
  ASSERT_FALSE(r.ok());
  EXPECT_EQ(r.status().code(), absl::StatusCode::kUnavailable);
}

}  // namespace
}  // namespace fedsynth
