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
#include "fedsynth/experiment.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "fedsynth/hash.h"
#include "fedsynth/box.h"
#include "fedsynth/pretrain.h"
#include "fedsynth/privacy_accounting.h"
#include "fedsynth/random.h"
#include "fedsynth/refine.h"
#include "fedsynth/synth_pipeline.h"

namespace fedsynth {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

absl::Status WriteFile(const std::string& dir, const std::string& name,
                       const std::string& content) {
  std::ofstream out(fs::path(dir) / name, std::ios::binary);
  if (!out) return absl::UnavailableError("cannot write " + (fs::path(dir) / name).string());
  out << content;
  return out ? absl::OkStatus() : absl::DataLossError("write failed: " + name);
}

std::string Path(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

absl::StatusOr<std::string> OneInput(const Inputs& inputs, const std::string& name) {
  auto it = inputs.find(name);
  if (it == inputs.end() || it->second.empty()) {
    return absl::InvalidArgumentError("missing required input --" + name);
  }
  if (it->second.size() != 1) return absl::InvalidArgumentError("--" + name + " takes one path");
  return it->second.front();
}

absl::StatusOr<std::vector<std::string>> ManyInputs(const Inputs& inputs,
                                                    const std::string& name) {
  auto it = inputs.find(name);
  if (it == inputs.end() || it->second.empty()) {
    return absl::InvalidArgumentError("missing required input --" + name);
  }
  return it->second;
}

absl::Status WriteStats(const std::string& dir, const std::string& name, const json& j) {
  return WriteFile(dir, name, j.dump(2) + "\n");
}

absl::Status RunSynth(const RunRequest& r, std::ostream& log) {
  const ExperimentConfig& c = r.config;
  SynthResult result;
  if (c.synthesis.mode == "private") {
    result.corpus = SynthesizePrivate(c, r.workers);
  } else {
    auto backend = MakeBackend(c.backend);
    if (!backend.ok()) return backend.status();
    if (c.synthesis.mode == "chat") {
      GenerationOptions o;
      o.max_assignments = static_cast<size_t>(c.synthesis.max_assignments);
      o.max_receivers = c.synthesis.max_receivers;
      o.max_topics = c.synthesis.max_topics;
      o.sampling = c.sampling;
      o.seed = c.seed;
      o.workers = r.workers;
      result = GenerateChats(**backend, VariableSets::Default(), o);
    } else {
      result = GenerateRaw(**backend, static_cast<size_t>(c.synthesis.raw_count), c.sampling,
                           r.workers);
    }
  }
  log << "synth: " << result.corpus.size() << " examples\n";
  if (absl::Status s = WriteCorpus(Path(r.out_dir, "corpus.jsonl"), result.corpus); !s.ok()) {
    return s;
  }
  return WriteStats(r.out_dir, "synth_stats.json", result.stats.ToJson());
}

absl::Status RunFilterCmd(const RunRequest& r, std::ostream& log) {
  auto paths = ManyInputs(r.inputs, "corpus");
  if (!paths.ok()) return paths.status();
  auto corpus = ReadCorpora(*paths);
  if (!corpus.ok()) return corpus.status();
  auto backend = MakeBackend(r.config.backend);
  if (!backend.ok()) return backend.status();
  SynthResult result = RunFilter(**backend, *corpus, r.config.sampling, r.workers);
  log << "filter: kept " << result.corpus.size() << " of " << corpus->size() << "\n";
  if (absl::Status s = WriteCorpus(Path(r.out_dir, "filtered.jsonl"), result.corpus); !s.ok()) {
    return s;
  }
  return WriteStats(r.out_dir, "filter_stats.json", result.stats.ToJson());
}

absl::Status RunTransformCmd(const RunRequest& r, std::ostream& log) {
  auto paths = ManyInputs(r.inputs, "corpus");
  if (!paths.ok()) return paths.status();
  auto corpus = ReadCorpora(*paths);
  if (!corpus.ok()) return corpus.status();
  auto backend = MakeBackend(r.config.backend);
  if (!backend.ok()) return backend.status();
  SynthResult result = RunTransform(**backend, *corpus, r.config.synthesis.transform_fraction,
                                    r.config.seed, r.config.sampling, r.workers);
  log << "transform: " << result.corpus.size() << " conversations\n";
  if (absl::Status s = WriteCorpus(Path(r.out_dir, "transformed.jsonl"), result.corpus);
      !s.ok()) {
    return s;
  }
  return WriteStats(r.out_dir, "transform_stats.json", result.stats.ToJson());
}

absl::Status RunPretrainCmd(const RunRequest& r, std::ostream& log) {
  const ExperimentConfig& c = r.config;
  auto paths = ManyInputs(r.inputs, "corpus");
  if (!paths.ok()) return paths.status();
  auto corpus = ReadCorpora(*paths);
  if (!corpus.ok()) return corpus.status();
  const Corpus processed = PreprocessForTraining(*corpus);

  absl::StatusOr<Vocabulary> vocab = absl::UnknownError("unset");
  if (r.inputs.contains("vocab")) {
    auto vp = OneInput(r.inputs, "vocab");
    if (!vp.ok()) return vp.status();
    vocab = Vocabulary::Load(*vp);
  } else if (r.inputs.contains("vocab_corpus")) {
    auto vc = ReadCorpora(r.inputs.at("vocab_corpus"));
    if (!vc.ok()) return vc.status();
    vocab = Vocabulary::Build(PreprocessForTraining(*vc), c.model.vocab_size);
  } else {
    vocab = Vocabulary::Build(processed, c.model.vocab_size);
  }
  if (!vocab.ok()) return vocab.status();

  ModelConfig mc = c.model;
  mc.vocab_size = vocab->size();
  const auto sequences = EncodeCorpus(processed, *vocab, mc.max_seq_len);
  PretrainOptions po = c.pretrain;
  po.workers = r.workers;
  auto result = Pretrain(ModelParameters::Initialize(mc, c.seed), sequences, po);
  if (!result.ok()) return result.status();
  log << "pretrain: " << sequences.size() << " sequences, final loss "
      << (result->losses.empty() ? 0.0 : result->losses.back()) << "\n";

  std::string losses;
  for (size_t i = 0; i < result->losses.size(); ++i) {
    losses += json{{"step", i + 1}, {"loss", result->losses[i]}}.dump() + "\n";
  }
  if (absl::Status s = WriteFile(r.out_dir, "pretrain_losses.jsonl", losses); !s.ok()) return s;
  if (absl::Status s = vocab->Save(Path(r.out_dir, "vocab.txt")); !s.ok()) return s;
  return SaveCheckpoint(Path(r.out_dir, "model.ckpt"), result->params);
}

struct ModelInputs {
  ModelParameters model;
  Vocabulary vocab;
};

absl::StatusOr<ModelInputs> LoadModelAndVocab(const Inputs& inputs, const std::string& model_key) {
  auto mp = OneInput(inputs, model_key);
  if (!mp.ok()) return mp.status();
  auto vp = OneInput(inputs, "vocab");
  if (!vp.ok()) return vp.status();
  auto model = LoadCheckpoint(*mp);
  if (!model.ok()) return model.status();
  auto vocab = Vocabulary::Load(*vp);
  if (!vocab.ok()) return vocab.status();
  if (model->config().vocab_size != vocab->size()) {
    return absl::InvalidArgumentError("checkpoint and vocabulary sizes differ");
  }
  return ModelInputs{*std::move(model), *std::move(vocab)};
}

absl::StatusOr<Populations> LoadPopulations(const RunRequest& r, const Vocabulary& vocab) {
  auto paths = ManyInputs(r.inputs, "private");
  if (!paths.ok()) return paths.status();
  auto corpus = ReadCorpora(*paths);
  if (!corpus.ok()) return corpus.status();
  return BuildPopulations(*corpus, vocab, r.config);
}

absl::Status RunFlCmd(const RunRequest& r, std::ostream& log) {
  const ExperimentConfig& c = r.config;
  auto mv = LoadModelAndVocab(r.inputs, "model");
  if (!mv.ok()) return mv.status();
  auto pops = LoadPopulations(r, mv->vocab);
  if (!pops.ok()) return pops.status();

  RoundConfig rc = c.fl;
  rc.workers = r.workers;
  TrainingSchedule schedule;
  schedule.eval_every = c.eval_every;
  schedule.eval = EvalConfig{1, 1, 0, 1, c.seed, r.workers};
  std::string metrics;
  absl::Status ckpt_status;
  auto result = RunFederatedTraining(
      mv->model, pops->train, &pops->holdout, rc, schedule,
      [&](const RoundMetrics& m, const ModelParameters& w) {
        metrics += m.ToJson().dump() + "\n";
        if (c.checkpoint_every > 0 && m.round % c.checkpoint_every == 0 && ckpt_status.ok()) {
          ckpt_status = SaveCheckpoint(Path(r.out_dir, absl::StrCat("round_", m.round, ".ckpt")), w);
        }
        if (m.eval_accuracy) log << "round " << m.round << " accuracy " << *m.eval_accuracy << "\n";
      });
  if (!result.ok()) return result.status();
  if (!ckpt_status.ok()) return ckpt_status;

  std::string curve = "round,accuracy\n";
  for (const auto& p : result->curve) curve += absl::StrFormat("%d,%.6f\n", p.round, p.mean);

  PrivacySpec spec = c.privacy;
  spec.total_rounds = std::max(1, rc.total_rounds);
  spec.min_separation = rc.min_separation;
  spec.noise_multiplier = rc.noise_multiplier;
  spec.max_participations = rc.max_participations > 0
                                ? rc.max_participations
                                : std::max<int64_t>(1, result->tracker.MaxCount());
  std::vector<int64_t> counts;
  for (const ClientDataset& cd : pops->train) counts.push_back(result->tracker.Count(cd.client_id));
  json privacy;
  if (auto rep = Account(spec); rep.ok()) {
    privacy = rep->ToJson();
  } else {
    privacy = {{"error", std::string(rep.status().message())}};
  }
  privacy["participation_audit"] =
      AuditParticipation(spec, counts).ok() ? "pass" : "fail";

  if (absl::Status s = WriteFile(r.out_dir, "metrics.jsonl", metrics); !s.ok()) return s;
  if (absl::Status s = WriteFile(r.out_dir, "curve.csv", curve); !s.ok()) return s;
  if (absl::Status s = WriteStats(r.out_dir, "privacy.json", privacy); !s.ok()) return s;
  return SaveCheckpoint(Path(r.out_dir, "final.ckpt"), result->final_weights);
}

absl::Status RunEvaluateCmd(const RunRequest& r, std::ostream& log) {
  auto mv = LoadModelAndVocab(r.inputs, "model");
  if (!mv.ok()) return mv.status();
  auto pops = LoadPopulations(r, mv->vocab);
  if (!pops.ok()) return pops.status();
  EvalConfig ec = r.config.eval;
  ec.workers = r.workers;
  auto e = FederatedEval(mv->model, pops->holdout, ec);
  if (!e.ok()) return e.status();
  auto central = CentralAccuracy(mv->model, pops->holdout, r.workers);
  if (!central.ok()) return central.status();
  const std::string table = absl::StrFormat("%.2f ± %.2f", 100 * e->mean, 100 * e->stddev);
  log << "evaluate: accuracy (%) " << table << "\n";
  return WriteStats(r.out_dir, "eval.json",
                    json{{"run_accuracy", e->run_accuracy},
                         {"mean", e->mean},
                         {"stddev", e->stddev},
                         {"percent", table},
                         {"holdout_clients", pops->holdout.size()},
                         {"central_accuracy", central->Accuracy()},
                         {"model_checkpoint", CheckpointId(mv->model)}});
}

absl::Status RunRefineCmd(const RunRequest& r, std::ostream& log) {
  const ExperimentConfig& c = r.config;
  auto pre = LoadModelAndVocab(r.inputs, "pre");
  if (!pre.ok()) return pre.status();
  auto fp = OneInput(r.inputs, "fine");
  if (!fp.ok()) return fp.status();
  auto fine = LoadCheckpoint(*fp);
  if (!fine.ok()) return fine.status();
  auto paths = ManyInputs(r.inputs, "corpus");
  if (!paths.ok()) return paths.status();
  auto corpus = ReadCorpora(*paths);
  if (!corpus.ok()) return corpus.status();
  const Corpus processed = PreprocessForTraining(*corpus);

  auto result = FilterCorpus(pre->model, *fine, pre->vocab, processed, c.refine, r.workers);
  if (!result.ok()) return result.status();
  json stats = result->StatsJson();
  stats["pre_checkpoint"] = CheckpointId(pre->model);
  stats["fine_checkpoint"] = CheckpointId(*fine);
  if (!c.refine_sweep.empty()) {
    auto sweep = SweepFineThreshold(pre->model, *fine, pre->vocab, processed, c.refine,
                                    c.refine_sweep, r.workers);
    if (!sweep.ok()) return sweep.status();
    for (const RefineResult& s : *sweep) stats["sweep"].push_back(s.StatsJson());
  }
  log << "refine: kept " << result->overall.kept << " of " << result->overall.total << "\n";
  if (absl::Status s = WriteCorpus(Path(r.out_dir, "refined.jsonl"), result->kept); !s.ok()) {
    return s;
  }
  return WriteStats(r.out_dir, "refine_stats.json", stats);
}

absl::Status RunAccountCmd(const RunRequest& r, std::ostream& log) {
  const ExperimentConfig& c = r.config;
  auto report = c.privacy_rho ? AccountRho(*c.privacy_rho, c.privacy.target_delta)
                              : Account(c.privacy);
  if (!report.ok()) return report.status();
  const std::string statement = report->Statement();
  log << statement;
  if (absl::Status s = WriteFile(r.out_dir, "privacy_statement.txt", statement); !s.ok()) {
    return s;
  }
  return WriteStats(r.out_dir, "privacy.json", report->ToJson());
}

absl::Status RunBoxCmd(const RunRequest& r, std::ostream& log) {
  auto result = RunBoxExperiment(r.config, r.workers, r.out_dir, log);
  return result.status();
}

std::vector<std::string> ListOutputs(const std::string& dir) {
  std::vector<std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string rel = fs::relative(e.path(), dir).generic_string();
    if (rel != "manifest.json") out.push_back(rel);
  }
  std::sort(out.begin(), out.end());
  return out;
}

absl::StatusOr<json> HashInputs(const Inputs& inputs) {
  json j = json::object();
  for (const auto& [name, paths] : inputs) {
    j[name] = json::array();
    for (const std::string& p : paths) {
      auto h = Sha256File(p);
      if (!h.ok()) return h.status();
      j[name].push_back({{"path", p}, {"sha256", *h}});
    }
  }
  return j;
}

}  // namespace

const std::vector<std::string>& SubcommandNames() {
  static const std::vector<std::string> names = {"synth",    "filter", "transform",
                                                 "pretrain", "flrun",  "evaluate",
                                                 "refine",   "account", "box"};
  return names;
}

absl::Status RunSubcommand(const RunRequest& request, std::ostream& log) {
  const std::string& cmd = request.subcommand;
  if (request.out_dir.empty()) return absl::InvalidArgumentError("--out is required");
  std::error_code ec;
  fs::create_directories(request.out_dir, ec);
  if (ec) return absl::UnavailableError("cannot create " + request.out_dir + ": " + ec.message());
  auto input_hashes = HashInputs(request.inputs);
  if (!input_hashes.ok()) return input_hashes.status();

  absl::Status status;
  if (cmd == "synth") {
    status = RunSynth(request, log);
  } else if (cmd == "filter") {
    status = RunFilterCmd(request, log);
  } else if (cmd == "transform") {
    status = RunTransformCmd(request, log);
  } else if (cmd == "pretrain") {
    status = RunPretrainCmd(request, log);
  } else if (cmd == "flrun") {
    status = RunFlCmd(request, log);
  } else if (cmd == "evaluate") {
    status = RunEvaluateCmd(request, log);
  } else if (cmd == "refine") {
    status = RunRefineCmd(request, log);
  } else if (cmd == "account") {
    status = RunAccountCmd(request, log);
  } else if (cmd == "box") {
    status = RunBoxCmd(request, log);
  } else {
    return absl::InvalidArgumentError("unknown subcommand: " + cmd);
  }
  if (!status.ok()) return status;

  json outputs = json::object();
  for (const std::string& rel : ListOutputs(request.out_dir)) {
    auto h = Sha256File(Path(request.out_dir, rel));
    if (!h.ok()) return h.status();
    outputs[rel] = *h;
  }
  const json manifest = {{"tool", "fedsynth"},
                         {"version", kToolVersion},
                         {"subcommand", cmd},
                         {"config", request.config.resolved},
                         {"config_sha256", request.config.Hash()},
                         {"seed", request.config.seed},
                         {"workers", request.workers},
                         {"inputs", *input_hashes},
                         {"outputs", outputs}};
  return WriteStats(request.out_dir, "manifest.json", manifest);
}

bool ReplayReport::AllIdentical() const {
  return !identical.empty() &&
         std::all_of(identical.begin(), identical.end(), [](const auto& kv) { return kv.second; });
}

absl::StatusOr<ReplayReport> Replay(const std::string& manifest_path, const std::string& out_dir,
                                    int workers, std::ostream& log) {
  std::ifstream in(manifest_path);
  if (!in) return absl::NotFoundError("cannot open manifest " + manifest_path);
  const json m = json::parse(in, nullptr, false);
  if (m.is_discarded() || !m.contains("config") || !m.contains("outputs") ||
      !m.contains("subcommand") || !m.contains("inputs")) {
    return absl::InvalidArgumentError("malformed manifest " + manifest_path);
  }
  if (m.value("version", "") != kToolVersion) {
    log << "replay: manifest written by version " << m.value("version", "?") << "\n";
  }
  auto cfg = ExperimentConfig::FromJson(m["config"]);
  if (!cfg.ok()) return cfg.status();
  if (cfg->Hash() != m.value("config_sha256", "")) {
    return absl::DataLossError("manifest config does not match its recorded hash");
  }
  RunRequest req{m["subcommand"].get<std::string>(), *std::move(cfg), {}, out_dir, workers};
  for (const auto& [name, entries] : m["inputs"].items()) {
    for (const json& e : entries) {
      const std::string path = e.at("path").get<std::string>();
      auto h = Sha256File(path);
      if (!h.ok()) return h.status();
      if (*h != e.at("sha256").get<std::string>()) {
        return absl::FailedPreconditionError("input changed since the manifest: " + path);
      }
      req.inputs[name].push_back(path);
    }
  }
  if (fs::exists(out_dir) && !fs::is_empty(out_dir)) {
    return absl::FailedPreconditionError("replay output directory must be empty: " + out_dir);
  }
  if (absl::Status s = RunSubcommand(req, log); !s.ok()) return s;
  ReplayReport report;
  for (const auto& [rel, sha] : m["outputs"].items()) {
    auto h = Sha256File(Path(out_dir, rel));
    report.identical[rel] = h.ok() && *h == sha.get<std::string>();
  }
  for (const std::string& rel : ListOutputs(out_dir)) {
    if (!report.identical.contains(rel)) report.identical[rel] = false;  // unexpected output
  }
  return report;
}

absl::StatusOr<Corpus> ReadCorpora(const std::vector<std::string>& paths) {
  Corpus all;
  for (const std::string& p : paths) {
    auto c = ReadCorpus(p);
    if (!c.ok()) return c.status();
    all.insert(all.end(), c->begin(), c->end());
  }
  return all;
}

Corpus SynthesizePrivate(const ExperimentConfig& cfg, int workers) {
  MockProfile profile = cfg.backend.mock;
  profile.style = MockStyle::kChatLike;
  profile.seed = cfg.synthesis.private_seed;
  profile.jitter = cfg.synthesis.private_jitter;
  auto backend = MakeMockBackend(profile);
  GenerationOptions o;
  o.max_assignments = static_cast<size_t>(cfg.synthesis.private_assignments);
  o.max_receivers = cfg.synthesis.max_receivers;
  o.max_topics = cfg.synthesis.max_topics;
  o.sampling = cfg.sampling;
  o.seed = cfg.synthesis.private_seed;
  o.workers = workers;
  o.source = Source::kPrivateSim;
  o.id_prefix = "user";
  return GenerateChats(*backend, VariableSets::Default(), o).corpus;
}

PrivateSplit SplitHoldout(std::span<const Example> corpus, double fraction, uint64_t seed) {
  auto key_of = [&](size_t i) {
    const Meta& m = corpus[i].meta();
    if (auto it = m.find("conv_id"); it != m.end()) return it->second;
    if (auto it = m.find("id"); it != m.end()) return it->second;
    return absl::StrCat("#", i);
  };
  std::vector<std::string> keys;
  for (size_t i = 0; i < corpus.size(); ++i) keys.push_back(key_of(i));
  std::vector<std::string> unique = keys;
  std::sort(unique.begin(), unique.end());
  unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
  Rng rng = MakeRng(seed, StreamTag::kPartition, {1});
  std::shuffle(unique.begin(), unique.end(), rng);
  const size_t n_hold = static_cast<size_t>(std::llround(fraction * unique.size()));
  std::vector<std::string> held(unique.begin(), unique.begin() + n_hold);
  std::sort(held.begin(), held.end());
  PrivateSplit split;
  for (size_t i = 0; i < corpus.size(); ++i) {
    (std::binary_search(held.begin(), held.end(), keys[i]) ? split.holdout : split.train)
        .push_back(corpus[i]);
  }
  return split;
}

absl::StatusOr<Populations> BuildPopulations(std::span<const Example> private_corpus,
                                             const Vocabulary& vocab,
                                             const ExperimentConfig& cfg) {
  const PrivateSplit split =
      SplitHoldout(private_corpus, cfg.partition.holdout_fraction, cfg.seed);
  const Corpus train = PreprocessForTraining(split.train);
  const Corpus holdout = PreprocessForTraining(split.holdout);
  PartitionOptions po;
  po.mode = cfg.partition.mode;
  po.max_seq_len = cfg.model.max_seq_len;
  po.seed = cfg.seed;
  po.num_clients = cfg.partition.num_clients;
  auto tr = PartitionPrivateCorpus(train, vocab, po);
  if (!tr.ok()) return tr.status();
  po.num_clients = cfg.partition.holdout_clients;
  po.seed = DeriveSeed(cfg.seed, StreamTag::kPartition, {2});
  auto ho = PartitionPrivateCorpus(holdout, vocab, po);
  if (!ho.ok()) return ho.status();
  return Populations{*std::move(tr), *std::move(ho)};
}

}  // namespace fedsynth
