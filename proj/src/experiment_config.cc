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
#include "fedsynth/experiment_config.h"

#include <cstdlib>
#include <fstream>

#include "absl/strings/str_cat.h"
#include "fedsynth/hash.h"

namespace fedsynth {
namespace {

using nlohmann::json;

const char* TypeName(const json& j) { return j.type_name(); }

bool CompatibleTypes(const json& slot, const json& value) {
  if (slot.is_null()) return value.is_null() || value.is_number();
  if (slot.is_number_float()) return value.is_number();
  if (slot.is_number_integer()) return value.is_number_integer();
  if (slot.is_array()) return value.is_array();
  return slot.type() == value.type();
}

template <typename T>
T Get(const json& j, const char* key) {
  return j.at(key).get<T>();
}

}  // namespace

absl::Status MergeStrict(json& base, const json& patch, const std::string& path) {
  if (!patch.is_object()) {
    return absl::InvalidArgumentError(absl::StrCat("config", path.empty() ? "" : " at ", path,
                                                   " must be an object"));
  }
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string key_path = path.empty() ? it.key() : path + "." + it.key();
    if (!base.contains(it.key())) {
      return absl::InvalidArgumentError("unknown config key: " + key_path);
    }
    json& slot = base[it.key()];
    if (slot.is_object()) {
      if (absl::Status s = MergeStrict(slot, it.value(), key_path); !s.ok()) return s;
      continue;
    }
    if (!CompatibleTypes(slot, it.value())) {
      return absl::InvalidArgumentError(absl::StrCat("config key ", key_path, " expects ",
                                                     TypeName(slot), ", got ",
                                                     TypeName(it.value())));
    }
    if (slot.is_array()) {
      for (const json& e : it.value()) {
        if (!e.is_number()) {
          return absl::InvalidArgumentError("config key " + key_path + " expects numbers");
        }
      }
    }
    slot = it.value();
  }
  return absl::OkStatus();
}

json ExperimentConfig::Defaults() {
  return json{
      {"seed", 1},
      {"backend",
       {{"kind", "mock"},
        {"style", "chat_like"},
        {"vocab_skew", 0.5},
        {"jitter", 0.0},
        {"seed", 0},
        {"fixture", ""},
        {"url", ""},
        {"auth_header", "Authorization"},
        {"auth_env", "FEDSYNTH_API_KEY"},
        {"timeout_ms", 30000},
        {"max_retries", 3},
        {"backoff_ms", 500}}},
      {"sampling", {{"top_k", 40}, {"temperature", 0.2}, {"max_tokens", 256}}},
      {"synthesis",
       {{"mode", "chat"},
        {"max_assignments", 100},
        {"max_receivers", 2},
        {"max_topics", 2},
        {"raw_count", 4000},
        {"transform_fraction", 0.2},
        {"private_seed", 7919},
        {"private_jitter", 0.3},
        {"private_assignments", 300}}},
      {"model", {{"vocab_size", 2000}, {"embed_dim", 16}, {"hidden_dim", 32}, {"max_seq_len", 32}}},
      {"pretrain",
       {{"steps", 1200}, {"batch_size", 32}, {"learning_rate", 0.01}, {"epsilon", 1e-9}}},
      {"fl",
       {{"clients_per_round", 10},
        {"client_lr", 0.5},
        {"server_lr", 0.1},
        {"momentum", 0.9},
        {"total_rounds", 200},
        {"noise_multiplier", 0.3},
        {"clip_norm", 1.0},
        {"min_separation", 5},
        {"max_participations", 0},
        {"local_epochs", 1},
        {"local_batch_size", 16},
        {"eval_every", 10},
        {"checkpoint_every", 0}}},
      {"partition",
       {{"num_clients", 100},
        {"holdout_clients", 30},
        {"holdout_fraction", 0.25},
        {"mode", "skewed"}}},
      {"eval", {{"runs", 3}, {"rounds_per_run", 2}, {"clients_per_round", 10}, {"min_separation", 2}}},
      {"privacy",
       {{"total_rounds", 200},
        {"max_participations", 40},
        {"min_separation", 5},
        {"noise_multiplier", 0.3},
        {"target_delta", 1e-10},
        {"rho", nullptr}}},
      {"refine",
       {{"max_oov", 0.6},
        {"min_fine_score", nullptr},
        {"fine_percentile", 40.0},
        {"require_fine_ge_pre", true},
        {"sweep", json::array()},
        {"percentile_sweep", {40.0, 25.0, 10.0}}}},
  };
}

absl::StatusOr<ExperimentConfig> ExperimentConfig::FromJson(const json& user) {
  json m = Defaults();
  if (absl::Status s = MergeStrict(m, user); !s.ok()) return s;
  ExperimentConfig c;
  c.resolved = m;
  c.seed = Get<uint64_t>(m, "seed");

  const json& b = m["backend"];
  c.backend.kind = Get<std::string>(b, "kind");
  if (c.backend.kind != "mock" && c.backend.kind != "recorded" && c.backend.kind != "remote") {
    return absl::InvalidArgumentError("backend.kind must be mock, recorded or remote");
  }
  auto style = ParseMockStyle(Get<std::string>(b, "style"));
  if (!style.ok()) return style.status();
  c.backend.mock.style = *style;
  c.backend.mock.vocab_skew = Get<double>(b, "vocab_skew");
  c.backend.mock.jitter = Get<double>(b, "jitter");
  c.backend.mock.seed = Get<uint64_t>(b, "seed");
  c.backend.fixture = Get<std::string>(b, "fixture");
  c.backend.remote.url = Get<std::string>(b, "url");
  c.backend.remote.auth_header = Get<std::string>(b, "auth_header");
  c.backend.auth_env = Get<std::string>(b, "auth_env");
  c.backend.remote.timeout_ms = Get<int>(b, "timeout_ms");
  c.backend.remote.max_retries = Get<int>(b, "max_retries");
  c.backend.remote.backoff_ms = Get<int>(b, "backoff_ms");

  const json& sp = m["sampling"];
  c.sampling.top_k = Get<int>(sp, "top_k");
  c.sampling.temperature = Get<double>(sp, "temperature");
  c.sampling.max_tokens = Get<int>(sp, "max_tokens");
  if (absl::Status s = c.sampling.Validate(); !s.ok()) return s;

  const json& sy = m["synthesis"];
  c.synthesis.mode = Get<std::string>(sy, "mode");
  if (c.synthesis.mode != "chat" && c.synthesis.mode != "raw" && c.synthesis.mode != "private") {
    return absl::InvalidArgumentError("synthesis.mode must be chat, raw or private");
  }
  c.synthesis.max_assignments = Get<int64_t>(sy, "max_assignments");
  c.synthesis.max_receivers = Get<int>(sy, "max_receivers");
  c.synthesis.max_topics = Get<int>(sy, "max_topics");
  c.synthesis.raw_count = Get<int64_t>(sy, "raw_count");
  c.synthesis.transform_fraction = Get<double>(sy, "transform_fraction");
  c.synthesis.private_seed = Get<uint64_t>(sy, "private_seed");
  c.synthesis.private_jitter = Get<double>(sy, "private_jitter");
  c.synthesis.private_assignments = Get<int64_t>(sy, "private_assignments");
  if (c.synthesis.max_assignments < 0 || c.synthesis.raw_count < 0 ||
      c.synthesis.private_assignments < 0 || c.synthesis.max_receivers < 1 ||
      c.synthesis.max_topics < 1 ||
      !(c.synthesis.transform_fraction >= 0 && c.synthesis.transform_fraction <= 1)) {
    return absl::InvalidArgumentError("synthesis section out of range");
  }

  const json& md = m["model"];
  c.model.vocab_size = Get<int>(md, "vocab_size");
  c.model.embed_dim = Get<int>(md, "embed_dim");
  c.model.hidden_dim = Get<int>(md, "hidden_dim");
  c.model.max_seq_len = Get<int>(md, "max_seq_len");
  if (absl::Status s = c.model.Validate(); !s.ok()) return s;

  const json& pt = m["pretrain"];
  c.pretrain.steps = Get<int>(pt, "steps");
  c.pretrain.batch_size = Get<int>(pt, "batch_size");
  c.pretrain.adam.learning_rate = Get<double>(pt, "learning_rate");
  c.pretrain.adam.epsilon = Get<double>(pt, "epsilon");
  c.pretrain.seed = c.seed;
  if (c.pretrain.steps < 0 || c.pretrain.batch_size < 1) {
    return absl::InvalidArgumentError("pretrain section out of range");
  }

  const json& fl = m["fl"];
  c.fl.clients_per_round = Get<int>(fl, "clients_per_round");
  c.fl.client_lr = Get<double>(fl, "client_lr");
  c.fl.server_lr = Get<double>(fl, "server_lr");
  c.fl.momentum = Get<double>(fl, "momentum");
  c.fl.total_rounds = Get<int>(fl, "total_rounds");
  c.fl.noise_multiplier = Get<double>(fl, "noise_multiplier");
  c.fl.clip_norm = Get<double>(fl, "clip_norm");
  c.fl.min_separation = Get<int>(fl, "min_separation");
  c.fl.max_participations = Get<int>(fl, "max_participations");
  c.fl.local_epochs = Get<int>(fl, "local_epochs");
  c.fl.local_batch_size = Get<int>(fl, "local_batch_size");
  c.fl.seed = c.seed;
  c.eval_every = Get<int>(fl, "eval_every");
  c.checkpoint_every = Get<int>(fl, "checkpoint_every");
  if (absl::Status s = c.fl.Validate(); !s.ok()) return s;
  if (c.eval_every < 0 || c.checkpoint_every < 0) {
    return absl::InvalidArgumentError("fl.eval_every and fl.checkpoint_every must be >= 0");
  }

  const json& pa = m["partition"];
  c.partition.num_clients = Get<int>(pa, "num_clients");
  c.partition.holdout_clients = Get<int>(pa, "holdout_clients");
  c.partition.holdout_fraction = Get<double>(pa, "holdout_fraction");
  auto mode = ParsePartitionMode(Get<std::string>(pa, "mode"));
  if (!mode.ok()) return mode.status();
  c.partition.mode = *mode;
  if (c.partition.num_clients < 1 || c.partition.holdout_clients < 1 ||
      !(c.partition.holdout_fraction > 0 && c.partition.holdout_fraction < 1)) {
    return absl::InvalidArgumentError("partition section out of range");
  }

  const json& ev = m["eval"];
  c.eval.runs = Get<int>(ev, "runs");
  c.eval.rounds_per_run = Get<int>(ev, "rounds_per_run");
  c.eval.clients_per_round = Get<int>(ev, "clients_per_round");
  c.eval.min_separation = Get<int>(ev, "min_separation");
  c.eval.seed = c.seed;
  if (c.eval.runs < 1 || c.eval.rounds_per_run < 1 || c.eval.clients_per_round < 0 ||
      c.eval.min_separation < 1) {
    return absl::InvalidArgumentError("eval section out of range");
  }

  const json& pr = m["privacy"];
  c.privacy.total_rounds = Get<int64_t>(pr, "total_rounds");
  c.privacy.max_participations = Get<int64_t>(pr, "max_participations");
  c.privacy.min_separation = Get<int64_t>(pr, "min_separation");
  c.privacy.noise_multiplier = Get<double>(pr, "noise_multiplier");
  c.privacy.target_delta = Get<double>(pr, "target_delta");
  if (!pr["rho"].is_null()) c.privacy_rho = Get<double>(pr, "rho");

  const json& rf = m["refine"];
  c.refine.max_oov = Get<double>(rf, "max_oov");
  if (!rf["min_fine_score"].is_null()) c.refine.min_fine_score = Get<double>(rf, "min_fine_score");
  c.refine.fine_percentile = Get<double>(rf, "fine_percentile");
  c.refine.require_fine_ge_pre = Get<bool>(rf, "require_fine_ge_pre");
  c.refine_sweep = Get<std::vector<double>>(rf, "sweep");
  c.refine_percentile_sweep = Get<std::vector<double>>(rf, "percentile_sweep");
  for (double p : c.refine_percentile_sweep) {
    if (!(p >= 0 && p <= 100)) return absl::InvalidArgumentError("refine.percentile_sweep outside [0,100]");
  }
  if (absl::Status s = c.refine.Validate(); !s.ok()) return s;
  return c;
}

absl::StatusOr<ExperimentConfig> ExperimentConfig::Load(
    const std::string& path, const std::vector<std::string>& overrides) {
  json user = json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) return absl::NotFoundError("cannot open config " + path);
    user = json::parse(in, nullptr, /*allow_exceptions=*/false, /*ignore_comments=*/true);
    if (user.is_discarded()) return absl::InvalidArgumentError("config is not valid JSON: " + path);
  }
  for (const std::string& ov : overrides) {
    const size_t eq = ov.find('=');
    if (eq == std::string::npos || eq == 0) {
      return absl::InvalidArgumentError("override must look like key.path=value: " + ov);
    }
    const std::string value_text = ov.substr(eq + 1);
    json value = json::parse(value_text, nullptr, false);
    if (value.is_discarded()) value = value_text;
    json* node = &user;
    std::string key_path = ov.substr(0, eq);
    size_t start = 0;
    while (true) {
      const size_t dot = key_path.find('.', start);
      const std::string key = key_path.substr(start, dot == std::string::npos ? dot : dot - start);
      if (key.empty()) return absl::InvalidArgumentError("bad override key: " + key_path);
      if (dot == std::string::npos) {
        (*node)[key] = value;
        break;
      }
      json& child = (*node)[key];
      if (!child.is_object()) child = json::object();
      node = &child;
      start = dot + 1;
    }
  }
  return FromJson(user);
}

std::string ExperimentConfig::Hash() const { return Sha256Hex(resolved.dump()); }

absl::StatusOr<std::unique_ptr<CompletionBackend>> MakeBackend(const BackendSection& section) {
  if (section.kind == "mock") return MakeMockBackend(section.mock);
  if (section.kind == "recorded") {
    if (section.fixture.empty()) return absl::InvalidArgumentError("backend.fixture is empty");
    auto rec = RecordedBackend::Load(section.fixture);
    if (!rec.ok()) return rec.status();
    return std::unique_ptr<CompletionBackend>(*std::move(rec));
  }
  if (section.remote.url.empty()) return absl::InvalidArgumentError("backend.url is empty");
  RemoteConfig rc = section.remote;
  if (!section.auth_env.empty()) {
    if (const char* v = std::getenv(section.auth_env.c_str())) rc.auth_value = v;
  }
  return MakeRemoteBackend(std::move(rc));
}

}  // namespace fedsynth
