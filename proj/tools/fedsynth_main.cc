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
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "absl/status/status.h"
#include "fedsynth/experiment.h"
#include "json.hpp"

namespace {

int Fail(const absl::Status& s) {
  std::cerr << nlohmann::json{{"error", absl::StatusCodeToString(s.code())},
                              {"message", std::string(s.message())}}
                   .dump()
            << "\n";
  return 1;
}

struct CommonFlags {
  std::string config;
  std::string out;
  std::vector<std::string> sets;
  std::string backend;
  long long seed = -1;
  int workers = 1;
  // inputs
  std::vector<std::string> corpus, vocab_corpus, priv;
  std::string vocab, model, pre, fine, mode;
};

void AddCommon(CLI::App* sub, CommonFlags& f) {
  sub->add_option("--config", f.config, "JSON config file (defaults when omitted)");
  sub->add_option("--out", f.out, "output directory")->required();
  sub->add_option("--set", f.sets, "override a config key, e.g. --set fl.total_rounds=50");
  sub->add_option("--backend", f.backend, "completion backend")
      ->check(CLI::IsMember({"mock", "recorded", "remote"}));
  sub->add_option("--seed", f.seed, "root seed (overrides config)");
  sub->add_option("--workers", f.workers, "worker threads; never changes outputs")
      ->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fedsynth: synthetic public data for private on-device language models"};
  app.require_subcommand(1);
  CommonFlags f;

  struct Sub {
    const char* name;
    const char* help;
  };
  const std::vector<Sub> subs = {
      {"synth", "generate a corpus (--mode chat|raw|private)"},
      {"filter", "keep conversation-like documents (--corpus)"},
      {"transform", "rewrite filtered documents as chats (--corpus)"},
      {"pretrain", "train a model on public corpora (--corpus [--vocab|--vocab-corpus])"},
      {"flrun", "federated fine-tuning with tree-aggregated noise (--model --vocab --private)"},
      {"evaluate", "federated evaluation on the holdout users (--model --vocab --private)"},
      {"refine", "score and filter a corpus (--pre --fine --vocab --corpus)"},
      {"account", "privacy accounting statement"},
      {"box", "end-to-end desk-scale experiment"},
  };
  for (const Sub& s : subs) {
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    AddCommon(sub, f);
    const std::string name = s.name;
    if (name == "synth") {
      sub->add_option("--mode", f.mode, "chat | raw | private")
          ->check(CLI::IsMember({"chat", "raw", "private"}));
    }
    if (name == "filter" || name == "transform" || name == "pretrain" || name == "refine") {
      sub->add_option("--corpus", f.corpus, "input corpus JSONL (repeatable)")->required();
    }
    if (name == "pretrain") {
      sub->add_option("--vocab", f.vocab, "existing vocabulary file");
      sub->add_option("--vocab-corpus", f.vocab_corpus, "build the vocabulary from these");
    }
    if (name == "flrun" || name == "evaluate") {
      sub->add_option("--model", f.model, "checkpoint")->required();
      sub->add_option("--vocab", f.vocab, "vocabulary file")->required();
      sub->add_option("--private", f.priv, "simulated private corpus JSONL")->required();
    }
    if (name == "refine") {
      sub->add_option("--pre", f.pre, "pre-trained checkpoint")->required();
      sub->add_option("--fine", f.fine, "fine-tuned checkpoint")->required();
      sub->add_option("--vocab", f.vocab, "vocabulary file")->required();
    }
  }
  std::string manifest, replay_out;
  int replay_workers = 1;
  CLI::App* replay = app.add_subcommand("replay", "re-run a manifest and compare outputs");
  replay->add_option("--manifest", manifest, "manifest.json of an earlier run")->required();
  replay->add_option("--out", replay_out, "empty output directory")->required();
  replay->add_option("--workers", replay_workers, "worker threads")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  if (replay->parsed()) {
    auto report = fedsynth::Replay(manifest, replay_out, replay_workers, std::cerr);
    if (!report.ok()) return Fail(report.status());
    for (const auto& [file, same] : report->identical) {
      std::cout << (same ? "identical " : "DIFFERS   ") << file << "\n";
    }
    if (!report->AllIdentical()) {
      return Fail(absl::DataLossError("replay outputs differ from the manifest"));
    }
    return 0;
  }

  const std::string cmd = app.get_subcommands().front()->get_name();
  std::vector<std::string> overrides = f.sets;
  if (f.seed >= 0) overrides.push_back("seed=" + std::to_string(f.seed));
  if (!f.backend.empty()) overrides.push_back("backend.kind=\"" + f.backend + "\"");
  if (!f.mode.empty()) overrides.push_back("synthesis.mode=\"" + f.mode + "\"");
  auto cfg = fedsynth::ExperimentConfig::Load(f.config, overrides);
  if (!cfg.ok()) return Fail(cfg.status());

  fedsynth::Inputs inputs;
  if (!f.corpus.empty()) inputs["corpus"] = f.corpus;
  if (!f.vocab_corpus.empty()) inputs["vocab_corpus"] = f.vocab_corpus;
  if (!f.priv.empty()) inputs["private"] = f.priv;
  if (!f.vocab.empty()) inputs["vocab"] = {f.vocab};
  if (!f.model.empty()) inputs["model"] = {f.model};
  if (!f.pre.empty()) inputs["pre"] = {f.pre};
  if (!f.fine.empty()) inputs["fine"] = {f.fine};

  fedsynth::RunRequest req{cmd, *std::move(cfg), std::move(inputs), f.out, f.workers};
  if (absl::Status s = fedsynth::RunSubcommand(req, std::cerr); !s.ok()) return Fail(s);
  std::cout << "wrote " << f.out << "/manifest.json\n";
  return 0;
}
