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
// A miniature run of every subcommand, chained through files the same way
// the CLI chains them. Used for determinism and replay checks.

#ifndef FEDSYNTH_TESTS_PIPELINE_FIXTURE_H_
#define FEDSYNTH_TESTS_PIPELINE_FIXTURE_H_

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "fedsynth/experiment.h"
#include "fedsynth/experiment_config.h"

namespace fedsynth::testing {

inline std::vector<std::string> SmallOverrides() {
  return {"model.vocab_size=300",       "model.embed_dim=8",
          "model.hidden_dim=8",         "model.max_seq_len=16",
          "pretrain.steps=10",          "pretrain.batch_size=8",
          "synthesis.max_assignments=6", "synthesis.raw_count=60",
          "synthesis.private_assignments=40",
          "partition.num_clients=12",   "partition.holdout_clients=4",
          "fl.clients_per_round=4",     "fl.total_rounds=4",
          "fl.min_separation=1",        "fl.eval_every=2",
          "fl.checkpoint_every=2",      "eval.clients_per_round=2",
          "eval.rounds_per_run=1",      "eval.min_separation=1",
          "refine.sweep=[-6.0,-5.0]"};
}

struct PipelineStep {
  std::string subcommand;
  std::string out_dir;
  std::string manifest;
};

inline absl::StatusOr<std::vector<PipelineStep>> RunSmallPipeline(const std::string& root,
                                                                  int workers,
                                                                  std::ostream& log) {
  namespace fs = std::filesystem;
  std::vector<PipelineStep> steps;
  auto run = [&](const std::string& cmd, const std::string& name,
                 std::vector<std::string> extra, Inputs inputs) -> absl::Status {
    std::vector<std::string> overrides = SmallOverrides();
    overrides.insert(overrides.end(), extra.begin(), extra.end());
    auto cfg = ExperimentConfig::Load("", overrides);
    if (!cfg.ok()) return cfg.status();
    const std::string out = (fs::path(root) / name).string();
    RunRequest req{cmd, *std::move(cfg), std::move(inputs), out, workers};
    if (absl::Status s = RunSubcommand(req, log); !s.ok()) return s;
    steps.push_back({cmd, out, (fs::path(out) / "manifest.json").string()});
    return absl::OkStatus();
  };
  auto at = [&](const std::string& name, const std::string& file) {
    return (fs::path(root) / name / file).string();
  };
  absl::Status s = run("synth", "chat", {}, {});
  if (s.ok()) s = run("synth", "web", {"synthesis.mode=raw", "backend.style=web_like"}, {});
  if (s.ok()) s = run("filter", "filtered", {}, {{"corpus", {at("web", "corpus.jsonl")}}});
  if (s.ok()) {
    s = run("transform", "transformed", {}, {{"corpus", {at("filtered", "filtered.jsonl")}}});
  }
  if (s.ok()) s = run("synth", "private", {"synthesis.mode=private"}, {});
  if (s.ok()) {
    s = run("pretrain", "pretrain", {},
            {{"corpus", {at("chat", "corpus.jsonl"), at("transformed", "transformed.jsonl")}},
             {"vocab_corpus", {at("chat", "corpus.jsonl"), at("web", "corpus.jsonl")}}});
  }
  if (s.ok()) {
    s = run("flrun", "fl", {},
            {{"model", {at("pretrain", "model.ckpt")}},
             {"vocab", {at("pretrain", "vocab.txt")}},
             {"private", {at("private", "corpus.jsonl")}}});
  }
  if (s.ok()) {
    s = run("evaluate", "eval", {},
            {{"model", {at("fl", "final.ckpt")}},
             {"vocab", {at("pretrain", "vocab.txt")}},
             {"private", {at("private", "corpus.jsonl")}}});
  }
  if (s.ok()) {
    s = run("refine", "refine", {},
            {{"pre", {at("pretrain", "model.ckpt")}},
             {"fine", {at("fl", "final.ckpt")}},
             {"vocab", {at("pretrain", "vocab.txt")}},
             {"corpus", {at("chat", "corpus.jsonl"), at("transformed", "transformed.jsonl")}}});
  }
  if (s.ok()) s = run("account", "account", {}, {});
  if (!s.ok()) return s;
  return steps;
}

}  // namespace fedsynth::testing

#endif  // FEDSYNTH_TESTS_PIPELINE_FIXTURE_H_
