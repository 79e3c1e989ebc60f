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
#include "fedsynth/box.h"

#include <filesystem>
#include <fstream>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "fedsynth/experiment.h"
#include "fedsynth/pretrain.h"
#include "fedsynth/synth_pipeline.h"

namespace fedsynth {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class Sink {
 public:
  explicit Sink(std::string dir) : dir_(std::move(dir)) {}

  absl::Status Text(const std::string& name, const std::string& content) {
    if (dir_.empty()) return absl::OkStatus();
    std::ofstream out(fs::path(dir_) / name, std::ios::binary);
    out << content;
    return out ? absl::OkStatus() : absl::UnavailableError("cannot write " + name);
  }
  absl::Status Corpus(const std::string& name, std::span<const Example> c) {
    if (dir_.empty()) return absl::OkStatus();
    return WriteCorpus((fs::path(dir_) / name).string(), c);
  }
  absl::Status Model(const std::string& name, const ModelParameters& p) {
    if (dir_.empty()) return absl::OkStatus();
    return SaveCheckpoint((fs::path(dir_) / name).string(), p);
  }

 private:
  std::string dir_;
};

#define BOX_RETURN_IF_ERROR(expr)            \
  do {                                       \
    if (absl::Status _s = (expr); !_s.ok()) { \
      return _s;                             \
    }                                        \
  } while (0)

absl::StatusOr<ModelParameters> PretrainOn(std::span<const Example> processed,
                                           const Vocabulary& vocab, const ExperimentConfig& cfg,
                                           int workers) {
  ModelConfig mc = cfg.model;
  mc.vocab_size = vocab.size();
  const auto sequences = EncodeCorpus(processed, vocab, mc.max_seq_len);
  PretrainOptions po = cfg.pretrain;
  po.workers = workers;
  auto r = Pretrain(ModelParameters::Initialize(mc, cfg.seed), sequences, po);
  if (!r.ok()) return r.status();
  return std::move(r->params);
}

double CurveAt(const TrainingResult& r, size_t i) { return r.curve[i].mean; }

}  // namespace

absl::StatusOr<BoxResult> RunBoxExperiment(const ExperimentConfig& cfg, int workers,
                                           const std::string& out_dir, std::ostream& log) {
  Sink sink(out_dir);
  if (!out_dir.empty()) fs::create_directories(out_dir);

  // Public corpora from the two mock styles.
  MockProfile chat_profile = cfg.backend.mock;
  chat_profile.style = MockStyle::kChatLike;
  MockProfile web_profile = cfg.backend.mock;
  web_profile.style = MockStyle::kWebLike;
  auto chat_backend = MakeMockBackend(chat_profile);
  auto web_backend = MakeMockBackend(web_profile);

  GenerationOptions go;
  go.max_assignments = static_cast<size_t>(cfg.synthesis.max_assignments);
  go.max_receivers = cfg.synthesis.max_receivers;
  go.max_topics = cfg.synthesis.max_topics;
  go.sampling = cfg.sampling;
  go.seed = cfg.seed;
  go.workers = workers;
  const SynthResult chats = GenerateChats(*chat_backend, VariableSets::Default(), go);
  const SynthResult web = GenerateRaw(*web_backend, static_cast<size_t>(cfg.synthesis.raw_count),
                                      cfg.sampling, workers);
  // The filter and transform prompts go to the chat-style model.
  const SynthResult filtered = RunFilter(*chat_backend, web.corpus, cfg.sampling, workers);
  const SynthResult transformed =
      RunTransform(*chat_backend, filtered.corpus, cfg.synthesis.transform_fraction, cfg.seed,
                   cfg.sampling, workers);
  const Corpus priv = SynthesizePrivate(cfg, workers);
  log << "box: " << chats.corpus.size() << " chats, " << web.corpus.size() << " web docs, "
      << filtered.corpus.size() << " filtered, " << transformed.corpus.size()
      << " transformed, " << priv.size() << " private conversations\n";
  BOX_RETURN_IF_ERROR(sink.Corpus("public_chat.jsonl", chats.corpus));
  BOX_RETURN_IF_ERROR(sink.Corpus("public_web.jsonl", web.corpus));
  BOX_RETURN_IF_ERROR(sink.Corpus("public_filtered.jsonl", filtered.corpus));
  BOX_RETURN_IF_ERROR(sink.Corpus("public_transformed.jsonl", transformed.corpus));
  BOX_RETURN_IF_ERROR(sink.Corpus("private_sim.jsonl", priv));

  const Corpus chat_proc = PreprocessForTraining(chats.corpus);
  const Corpus web_proc = PreprocessForTraining(web.corpus);
  Corpus public_union = chat_proc;
  public_union.insert(public_union.end(), web_proc.begin(), web_proc.end());
  auto vocab = Vocabulary::Build(public_union, cfg.model.vocab_size);
  if (!vocab.ok()) return vocab.status();
  if (!out_dir.empty()) BOX_RETURN_IF_ERROR(vocab->Save((fs::path(out_dir) / "vocab.txt").string()));

  auto pops = BuildPopulations(priv, *vocab, cfg);
  if (!pops.ok()) return pops.status();

  auto chat_model = PretrainOn(chat_proc, *vocab, cfg, workers);
  if (!chat_model.ok()) return chat_model.status();
  auto web_model = PretrainOn(web_proc, *vocab, cfg, workers);
  if (!web_model.ok()) return web_model.status();
  BOX_RETURN_IF_ERROR(sink.Model("pretrain_chat.ckpt", *chat_model));
  BOX_RETURN_IF_ERROR(sink.Model("pretrain_web.ckpt", *web_model));
  log << "box: pre-trained both models\n";

  RoundConfig rc = cfg.fl;
  rc.workers = workers;
  TrainingSchedule schedule;
  schedule.eval_every = cfg.eval_every > 0 ? cfg.eval_every : 10;
  schedule.eval = EvalConfig{1, 1, 0, 1, cfg.seed, workers};

  std::string chat_metrics, web_metrics;
  auto chat_run = RunFederatedTraining(
      *chat_model, pops->train, &pops->holdout, rc, schedule,
      [&](const RoundMetrics& m, const ModelParameters&) {
        chat_metrics += m.ToJson().dump() + "\n";
      });
  if (!chat_run.ok()) return chat_run.status();
  auto web_run = RunFederatedTraining(
      *web_model, pops->train, &pops->holdout, rc, schedule,
      [&](const RoundMetrics& m, const ModelParameters&) {
        web_metrics += m.ToJson().dump() + "\n";
      });
  if (!web_run.ok()) return web_run.status();
  BOX_RETURN_IF_ERROR(sink.Text("metrics_chat.jsonl", chat_metrics));
  BOX_RETURN_IF_ERROR(sink.Text("metrics_web.jsonl", web_metrics));
  BOX_RETURN_IF_ERROR(sink.Model("fl_chat.ckpt", chat_run->final_weights));
  BOX_RETURN_IF_ERROR(sink.Model("fl_web.ckpt", web_run->final_weights));

  BoxResult result;
  for (size_t i = 0; i < chat_run->curve.size(); ++i) {
    result.curve.push_back({chat_run->curve[i].round, CurveAt(*chat_run, i), CurveAt(*web_run, i)});
  }
  if (!result.curve.empty()) {
    const CurvePoint& first = result.curve.front();
    result.round0_relative_gain = first.web > 0 ? first.chat / first.web - 1.0 : 0.0;
    const CurvePoint& last = result.curve.back();
    result.web_rounds = last.round;
    for (const CurvePoint& p : result.curve) {
      if (p.chat >= last.web) {
        result.chat_rounds_to_web_final = p.round;
        break;
      }
    }
  }
  EvalConfig table_eval = cfg.eval;
  table_eval.workers = workers;
  auto chat_final = FederatedEval(chat_run->final_weights, pops->holdout, table_eval);
  if (!chat_final.ok()) return chat_final.status();
  auto web_final = FederatedEval(web_run->final_weights, pops->holdout, table_eval);
  if (!web_final.ok()) return web_final.status();
  result.chat_final = *chat_final;
  result.web_final = *web_final;
  log << "box: federated runs done\n";

  // Refinement: pre-train on the mix, fine-tune privately, refine the mix,
  // pre-train again on what survived and compare on the holdout.
  Corpus mix = filtered.corpus;
  mix.insert(mix.end(), chats.corpus.begin(), chats.corpus.end());
  mix.insert(mix.end(), transformed.corpus.begin(), transformed.corpus.end());
  const Corpus mix_proc = PreprocessForTraining(mix);
  auto mix_model = PretrainOn(mix_proc, *vocab, cfg, workers);
  if (!mix_model.ok()) return mix_model.status();
  auto mix_run = RunFederatedTraining(*mix_model, pops->train, nullptr, rc, TrainingSchedule{});
  if (!mix_run.ok()) return mix_run.status();
  auto scores = ScoreCorpus(*mix_model, mix_run->final_weights, *vocab, mix_proc, workers);
  if (!scores.ok()) return scores.status();
  std::vector<ClientDataset> validation, test;
  for (const ClientDataset& c : pops->holdout) (c.client_id % 2 == 0 ? validation : test).push_back(c);

  std::vector<double> percentiles = cfg.refine_percentile_sweep;
  if (percentiles.empty()) percentiles.push_back(cfg.refine.fine_percentile);
  std::optional<ModelParameters> best_model;
  double best_validation = -1.0;
  for (double pct : percentiles) {
    RefineThresholds th = cfg.refine;
    th.fine_percentile = pct;
    if (!cfg.refine.min_fine_score) th.min_fine_score.reset();
    RefineResult r = ApplyThresholds(mix_proc, *scores, th);
    if (r.kept.empty()) continue;
    auto model = PretrainOn(r.kept, *vocab, cfg, workers);
    if (!model.ok()) return model.status();
    auto acc = CentralAccuracy(*model, validation, workers);
    if (!acc.ok()) return acc.status();
    result.refine_sweep.push_back(
        {pct, r.thresholds.min_fine_score.value_or(0.0), r.overall.kept, acc->Accuracy()});
    log << "box: refine cutoff at percentile " << pct << " keeps " << r.overall.kept
        << ", validation accuracy " << acc->Accuracy() << "\n";
    // Ties keep the stricter (earlier) cutoff.
    if (acc->Accuracy() > best_validation) {
      best_validation = acc->Accuracy();
      best_model = *std::move(model);
      result.chosen_percentile = pct;
      result.refine = std::move(r);
    }
  }
  if (!best_model) return absl::FailedPreconditionError("refinement kept nothing");
  const ModelParameters& refined_model = *best_model;
  auto unrefined_acc = CentralAccuracy(*mix_model, test, workers);
  if (!unrefined_acc.ok()) return unrefined_acc.status();
  auto refined_acc = CentralAccuracy(refined_model, test, workers);
  if (!refined_acc.ok()) return refined_acc.status();
  result.unrefined_accuracy = unrefined_acc->Accuracy();
  result.refined_accuracy = refined_acc->Accuracy();
  json refine_stats = result.refine.StatsJson();
  refine_stats["pre_checkpoint"] = CheckpointId(*mix_model);
  refine_stats["fine_checkpoint"] = CheckpointId(mix_run->final_weights);
  BOX_RETURN_IF_ERROR(sink.Corpus("refined_mix.jsonl", result.refine.kept));
  BOX_RETURN_IF_ERROR(sink.Text("refine_stats.json", refine_stats.dump(2) + "\n"));
  BOX_RETURN_IF_ERROR(sink.Model("pretrain_mix.ckpt", *mix_model));
  BOX_RETURN_IF_ERROR(sink.Model("pretrain_refined.ckpt", refined_model));

  BOX_RETURN_IF_ERROR(sink.Text("figure5.csv", result.Figure5Csv()));
  BOX_RETURN_IF_ERROR(sink.Text("table3.txt", result.Table3Text()));
  BOX_RETURN_IF_ERROR(sink.Text("summary.json", result.Summary().dump(2) + "\n"));
  log << result.Table3Text();
  return result;
}

std::string BoxResult::Figure5Csv() const {
  std::string out = "round,chat_pretrained,web_pretrained\n";
  for (const CurvePoint& p : curve) out += absl::StrFormat("%d,%.6f,%.6f\n", p.round, p.chat, p.web);
  return out;
}

std::string BoxResult::Table3Text() const {
  auto cell = [](const EvalResult& e) {
    return absl::StrFormat("%.2f ± %.2f", 100 * e.mean, 100 * e.stddev);
  };
  std::string out = "pre-training     NWP accuracy (%), mean ± std over federated eval runs\n";
  out += "chat-style       " + cell(chat_final) + "\n";
  out += "web-style        " + cell(web_final) + "\n";
  return out;
}

json BoxResult::Summary() const {
  json j;
  j["round0_chat"] = curve.empty() ? 0.0 : curve.front().chat;
  j["round0_web"] = curve.empty() ? 0.0 : curve.front().web;
  j["round0_relative_gain"] = round0_relative_gain;
  j["web_rounds"] = web_rounds;
  j["web_final"] = curve.empty() ? 0.0 : curve.back().web;
  j["chat_final"] = curve.empty() ? 0.0 : curve.back().chat;
  if (chat_rounds_to_web_final) {
    j["chat_rounds_to_web_final"] = *chat_rounds_to_web_final;
  } else {
    j["chat_rounds_to_web_final"] = nullptr;
  }
  j["table3"] = {{"chat", {{"runs", chat_final.run_accuracy}, {"mean", chat_final.mean},
                           {"stddev", chat_final.stddev}}},
                 {"web", {{"runs", web_final.run_accuracy}, {"mean", web_final.mean},
                          {"stddev", web_final.stddev}}}};
  j["refine"] = refine.StatsJson();
  j["refine_chosen_percentile"] = chosen_percentile;
  for (const SweepPoint& p : refine_sweep) {
    j["refine_sweep"].push_back({{"percentile", p.percentile},
                                 {"min_fine_score", p.min_fine_score},
                                 {"kept", p.kept},
                                 {"validation_accuracy", p.validation_accuracy}});
  }
  j["unrefined_accuracy"] = unrefined_accuracy;
  j["refined_accuracy"] = refined_accuracy;
  return j;
}

}  // namespace fedsynth
