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
#include "fedsynth/fl_dp.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include "absl/strings/str_cat.h"
#include "fedsynth/parallel.h"
#include "fedsynth/random.h"

namespace fedsynth {
namespace {

double Median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double SampleStd(std::span<const double> v, double mean) {
  if (v.size() < 2) return 0.0;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

absl::Status RoundConfig::Validate() const {
  if (clients_per_round < 1) return absl::InvalidArgumentError("clients_per_round must be >= 1");
  if (!(clip_norm > 0)) return absl::InvalidArgumentError("clip_norm must be > 0");
  if (!(noise_multiplier >= 0)) return absl::InvalidArgumentError("noise_multiplier must be >= 0");
  if (min_separation < 1) return absl::InvalidArgumentError("min_separation must be >= 1");
  if (max_participations < 0) return absl::InvalidArgumentError("max_participations must be >= 0");
  if (local_epochs < 1 || local_batch_size < 1) {
    return absl::InvalidArgumentError("local_epochs and local_batch_size must be >= 1");
  }
  if (total_rounds < 0) return absl::InvalidArgumentError("total_rounds must be >= 0");
  if (!std::isfinite(client_lr) || !std::isfinite(server_lr) || !std::isfinite(momentum)) {
    return absl::InvalidArgumentError("learning rates and momentum must be finite");
  }
  return absl::OkStatus();
}

double RoundConfig::NodeStd() const {
  return noise_multiplier * clip_norm / static_cast<double>(clients_per_round);
}

double L2Norm(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

double ClipDelta(std::span<double> x, double clip_norm) {
  const double norm = L2Norm(x);
  if (norm <= clip_norm) return norm;
  double scale = clip_norm / norm;
  std::vector<double> original(x.begin(), x.end());
  for (size_t i = 0; i < x.size(); ++i) x[i] = original[i] * scale;
  // Rounding can leave the result a few ulps above the bound.
  while (L2Norm(x) > clip_norm) {
    scale = std::nextafter(scale, 0.0);
    for (size_t i = 0; i < x.size(); ++i) x[i] = original[i] * scale;
  }
  return norm;
}

ClientResult ClientUpdate(const ModelParameters& global, const ClientDataset& client,
                          const RoundConfig& cfg, int64_t round) {
  ClientResult out;
  ModelParameters local = global;
  Rng rng = MakeRng(cfg.seed, StreamTag::kClientUpdate,
                    {static_cast<uint64_t>(round), static_cast<uint64_t>(client.client_id)});
  std::vector<size_t> order(client.sequences.size());
  std::vector<std::vector<TokenId>> batch;
  for (int epoch = 0; epoch < cfg.local_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    for (size_t start = 0; start < order.size();
         start += static_cast<size_t>(cfg.local_batch_size)) {
      batch.clear();
      const size_t end = std::min(order.size(), start + cfg.local_batch_size);
      for (size_t i = start; i < end; ++i) batch.push_back(client.sequences[order[i]]);
      auto lg = ComputeLossAndGradient(local, batch, 1);
      if (!lg.ok() || !std::isfinite(lg->loss) || !lg->gradient.AllFinite()) {
        out.dropped = true;
        return out;
      }
      std::span<double> w = local.flat();
      std::span<const double> g = lg->gradient.flat();
      for (size_t i = 0; i < w.size(); ++i) w[i] -= cfg.client_lr * g[i];
    }
  }
  out.delta.resize(global.size());
  std::span<const double> w = local.flat();
  std::span<const double> w0 = global.flat();
  for (size_t i = 0; i < w.size(); ++i) out.delta[i] = w[i] - w0[i];
  if (!std::all_of(out.delta.begin(), out.delta.end(), [](double v) { return std::isfinite(v); })) {
    out.delta.clear();
    out.dropped = true;
    return out;
  }
  out.pre_clip_norm = ClipDelta(out.delta, cfg.clip_norm);
  out.post_clip_norm = L2Norm(out.delta);
  return out;
}

TreeAggregator::TreeAggregator(size_t dim, double node_std, uint64_t seed)
    : dim_(dim), node_std_(node_std), seed_(seed), prefix_(dim, 0.0), noisy_(dim, 0.0) {}

std::vector<TreeAggregator::NodeKey> TreeAggregator::CoveringNodes(int64_t t) {
  std::vector<NodeKey> nodes;
  for (int level = 62; level >= 0; --level) {
    if ((t >> level) & 1) nodes.push_back({level, t >> level});
  }
  return nodes;
}

std::vector<double> TreeAggregator::SampleNode(NodeKey key) const {
  Rng rng = MakeRng(seed_, StreamTag::kTreeNoise,
                    {static_cast<uint64_t>(key.level), static_cast<uint64_t>(key.index)});
  std::normal_distribution<double> normal(0.0, node_std_);
  std::vector<double> noise(dim_);
  for (double& v : noise) v = normal(rng);
  return noise;
}

std::span<const double> TreeAggregator::Add(std::span<const double> x) {
  ++rounds_;
  for (size_t i = 0; i < dim_; ++i) prefix_[i] += x[i];
  noisy_ = prefix_;
  if (node_std_ == 0.0) return noisy_;

  const std::vector<NodeKey> cover = CoveringNodes(rounds_);
  // Nodes that left the prefix are never needed again.
  for (auto it = live_.begin(); it != live_.end();) {
    if (std::find(cover.begin(), cover.end(), it->first) == cover.end()) {
      it = live_.erase(it);
    } else {
      ++it;
    }
  }
  for (const NodeKey& key : cover) {
    auto it = live_.find(key);
    if (it == live_.end()) it = live_.emplace(key, SampleNode(key)).first;
    for (size_t i = 0; i < dim_; ++i) noisy_[i] += it->second[i];
  }
  return noisy_;
}

std::optional<std::span<const double>> TreeAggregator::NodeNoise(NodeKey key) const {
  auto it = live_.find(key);
  if (it == live_.end()) return std::nullopt;
  return std::span<const double>(it->second);
}

bool ParticipationTracker::Eligible(int client_id, int64_t round) const {
  auto it = history_.find(client_id);
  if (it == history_.end() || it->second.empty()) return true;
  if (max_participations_ > 0 &&
      static_cast<int64_t>(it->second.size()) >= max_participations_) {
    return false;
  }
  return round - it->second.back() >= min_separation_;
}

absl::Status ParticipationTracker::Record(int client_id, int64_t round) {
  if (!Eligible(client_id, round)) {
    return absl::FailedPreconditionError(
        absl::StrCat("client ", client_id, " is not eligible in round ", round));
  }
  history_[client_id].push_back(round);
  return absl::OkStatus();
}

int64_t ParticipationTracker::Count(int client_id) const {
  auto it = history_.find(client_id);
  return it == history_.end() ? 0 : static_cast<int64_t>(it->second.size());
}

int64_t ParticipationTracker::MaxCount() const {
  int64_t m = 0;
  for (const auto& [id, rounds] : history_) m = std::max<int64_t>(m, rounds.size());
  return m;
}

std::vector<int> SampleClients(std::vector<int> eligible, int m, Rng& rng) {
  std::sort(eligible.begin(), eligible.end());
  std::shuffle(eligible.begin(), eligible.end(), rng);
  eligible.resize(std::min<size_t>(eligible.size(), static_cast<size_t>(std::max(0, m))));
  std::sort(eligible.begin(), eligible.end());
  return eligible;
}

nlohmann::json RoundMetrics::ToJson() const {
  nlohmann::json j = {{"round", round},
                      {"eligible_clients", eligible},
                      {"sampled_clients", sampled},
                      {"dropped_clients", dropped},
                      {"pre_clip_norm", {{"min", pre_clip_min}, {"median", pre_clip_median},
                                         {"max", pre_clip_max}}},
                      {"post_clip_norm", {{"min", post_clip_min}, {"median", post_clip_median},
                                          {"max", post_clip_max}}},
                      {"clipped_fraction", clipped_fraction},
                      {"noise_std", noise_std}};
  if (eval_accuracy) j["eval_accuracy"] = *eval_accuracy;
  if (eval_stddev) j["eval_stddev"] = *eval_stddev;
  return j;
}

FederatedTrainer::FederatedTrainer(ModelParameters initial,
                                   const std::vector<ClientDataset>* population,
                                   const RoundConfig& cfg)
    : cfg_(cfg),
      population_(population),
      initial_(initial),
      weights_(std::move(initial)),
      momentum_(weights_.size(), 0.0),
      tree_(weights_.size(), cfg.NodeStd(), cfg.seed),
      tracker_(cfg.min_separation, cfg.max_participations) {}

absl::StatusOr<FederatedTrainer> FederatedTrainer::Create(
    ModelParameters initial, const std::vector<ClientDataset>* population,
    const RoundConfig& cfg) {
  if (absl::Status s = cfg.Validate(); !s.ok()) return s;
  if (population == nullptr || population->empty()) {
    return absl::InvalidArgumentError("empty client population");
  }
  for (size_t i = 0; i < population->size(); ++i) {
    if ((*population)[i].client_id != static_cast<int>(i)) {
      return absl::InvalidArgumentError("client ids must equal their population index");
    }
    if ((*population)[i].sequences.empty()) {
      return absl::InvalidArgumentError(absl::StrCat("client ", i, " has no data"));
    }
  }
  if (!initial.AllFinite()) return absl::InvalidArgumentError("non-finite initial weights");
  return FederatedTrainer(std::move(initial), population, cfg);
}

absl::StatusOr<RoundMetrics> FederatedTrainer::Step() {
  const int64_t t = round_ + 1;
  std::vector<int> eligible;
  for (const ClientDataset& c : *population_) {
    if (tracker_.Eligible(c.client_id, t)) eligible.push_back(c.client_id);
  }
  RoundMetrics metrics;
  metrics.round = t;
  metrics.eligible = static_cast<int>(eligible.size());
  if (metrics.eligible < cfg_.clients_per_round) {
    return absl::FailedPreconditionError(
        absl::StrCat("insufficient_eligible_clients: round ", t, " has ", eligible.size(),
                     " eligible, needs ", cfg_.clients_per_round));
  }
  Rng rng = MakeRng(cfg_.seed, StreamTag::kClientSampling, {static_cast<uint64_t>(t)});
  const std::vector<int> sampled = SampleClients(std::move(eligible), cfg_.clients_per_round, rng);
  metrics.sampled = static_cast<int>(sampled.size());

  std::vector<ClientResult> results(sampled.size());
  ParallelFor(sampled.size(), cfg_.workers, [&](size_t i) {
    results[i] = ClientUpdate(weights_, (*population_)[sampled[i]], cfg_, t);
  });

  // Dropped clients contribute zero; the average still divides by m.
  std::vector<double> avg(weights_.size(), 0.0);
  std::vector<double> pre, post;
  int clipped = 0;
  for (size_t i = 0; i < sampled.size(); ++i) {
    if (absl::Status s = tracker_.Record(sampled[i], t); !s.ok()) return s;
    const ClientResult& r = results[i];
    if (r.dropped) {
      ++metrics.dropped;
      continue;
    }
    for (size_t k = 0; k < avg.size(); ++k) avg[k] += r.delta[k];
    pre.push_back(r.pre_clip_norm);
    post.push_back(r.post_clip_norm);
    if (r.pre_clip_norm > cfg_.clip_norm) ++clipped;
  }
  const double m = static_cast<double>(cfg_.clients_per_round);
  for (double& v : avg) v /= m;

  std::span<const double> prefix = tree_.Add(avg);
  std::span<const double> w0 = initial_.flat();
  std::span<double> w = weights_.flat();
  for (size_t k = 0; k < w.size(); ++k) {
    momentum_[k] = cfg_.momentum * momentum_[k] + prefix[k];
    w[k] = w0[k] + cfg_.server_lr * momentum_[k];
  }
  round_ = t;

  if (!pre.empty()) {
    metrics.pre_clip_min = *std::min_element(pre.begin(), pre.end());
    metrics.pre_clip_max = *std::max_element(pre.begin(), pre.end());
    metrics.pre_clip_median = Median(pre);
    metrics.post_clip_min = *std::min_element(post.begin(), post.end());
    metrics.post_clip_max = *std::max_element(post.begin(), post.end());
    metrics.post_clip_median = Median(post);
    metrics.clipped_fraction = static_cast<double>(clipped) / static_cast<double>(pre.size());
  }
  metrics.noise_std = tree_.node_std();
  return metrics;
}

absl::StatusOr<AccuracyCounts> CentralAccuracy(const ModelParameters& params,
                                               const std::vector<ClientDataset>& population,
                                               int workers) {
  std::vector<absl::StatusOr<AccuracyCounts>> per(population.size());
  ParallelFor(population.size(), workers,
              [&](size_t i) { per[i] = NwpAccuracy(params, population[i].sequences); });
  AccuracyCounts total;
  for (auto& c : per) {
    if (!c.ok()) return c.status();
    total += *c;
  }
  return total;
}

absl::StatusOr<EvalResult> FederatedEval(const ModelParameters& params,
                                         const std::vector<ClientDataset>& population,
                                         const EvalConfig& cfg) {
  if (population.empty()) return absl::InvalidArgumentError("empty eval population");
  if (cfg.runs < 1 || cfg.rounds_per_run < 1 || cfg.clients_per_round < 0 ||
      cfg.min_separation < 1) {
    return absl::InvalidArgumentError("invalid eval config");
  }
  // Device-side metrics do not depend on which run asks for them.
  std::vector<absl::StatusOr<AccuracyCounts>> per(population.size());
  ParallelFor(population.size(), cfg.workers,
              [&](size_t i) { per[i] = NwpAccuracy(params, population[i].sequences); });
  for (auto& c : per) {
    if (!c.ok()) return c.status();
  }
  const int m = cfg.clients_per_round == 0 ? static_cast<int>(population.size())
                                           : cfg.clients_per_round;
  EvalResult result;
  for (int run = 0; run < cfg.runs; ++run) {
    ParticipationTracker tracker(cfg.min_separation, 0);
    AccuracyCounts counts;
    for (int r = 1; r <= cfg.rounds_per_run; ++r) {
      std::vector<int> eligible;
      for (size_t i = 0; i < population.size(); ++i) {
        if (tracker.Eligible(static_cast<int>(i), r)) eligible.push_back(static_cast<int>(i));
      }
      if (static_cast<int>(eligible.size()) < m) {
        return absl::FailedPreconditionError(absl::StrCat(
            "insufficient_eligible_clients: eval run ", run, " round ", r));
      }
      Rng rng = MakeRng(cfg.seed, StreamTag::kEvalSampling,
                        {static_cast<uint64_t>(run), static_cast<uint64_t>(r)});
      for (int id : SampleClients(std::move(eligible), m, rng)) {
        if (absl::Status s = tracker.Record(id, r); !s.ok()) return s;
        counts += *per[id];
      }
    }
    result.run_accuracy.push_back(counts.Accuracy());
  }
  result.mean = std::accumulate(result.run_accuracy.begin(), result.run_accuracy.end(), 0.0) /
                static_cast<double>(result.run_accuracy.size());
  result.stddev = SampleStd(result.run_accuracy, result.mean);
  return result;
}

absl::StatusOr<TrainingResult> RunFederatedTraining(
    ModelParameters initial, const std::vector<ClientDataset>& population,
    const std::vector<ClientDataset>* eval_population, const RoundConfig& cfg,
    const TrainingSchedule& schedule,
    const std::function<void(const RoundMetrics&, const ModelParameters&)>& on_round) {
  auto trainer = FederatedTrainer::Create(std::move(initial), &population, cfg);
  if (!trainer.ok()) return trainer.status();
  const bool evaluating = eval_population != nullptr && schedule.eval_every > 0;
  TrainingResult result{trainer->weights(), {}, {}, trainer->tracker()};

  auto evaluate = [&](int64_t round) -> absl::StatusOr<EvalResult> {
    EvalConfig ec = schedule.eval;
    ec.seed = DeriveSeed(schedule.eval.seed, StreamTag::kEvalSampling,
                         {static_cast<uint64_t>(round)});
    auto e = FederatedEval(trainer->weights(), *eval_population, ec);
    if (e.ok()) result.curve.push_back({round, e->mean, e->stddev});
    return e;
  };

  if (evaluating && schedule.eval_at_start) {
    if (auto e = evaluate(0); !e.ok()) return e.status();
  }
  for (int r = 0; r < cfg.total_rounds; ++r) {
    auto metrics = trainer->Step();
    if (!metrics.ok()) return metrics.status();
    if (evaluating && metrics->round % schedule.eval_every == 0) {
      auto e = evaluate(metrics->round);
      if (!e.ok()) return e.status();
      metrics->eval_accuracy = e->mean;
      metrics->eval_stddev = e->stddev;
    }
    if (on_round) on_round(*metrics, trainer->weights());
    result.rounds.push_back(*std::move(metrics));
  }
  result.final_weights = trainer->weights();
  result.tracker = trainer->tracker();
  return result;
}

absl::StatusOr<PartitionMode> ParsePartitionMode(std::string_view name) {
  if (name == "iid") return PartitionMode::kIid;
  if (name == "skewed") return PartitionMode::kSkewed;
  return absl::InvalidArgumentError("unknown partition mode: " + std::string(name));
}

absl::StatusOr<std::vector<ClientDataset>> PartitionPrivateCorpus(
    std::span<const Example> corpus, const Vocabulary& vocab, const PartitionOptions& options) {
  if (options.num_clients < 1) return absl::InvalidArgumentError("num_clients must be >= 1");
  std::vector<size_t> usable;
  std::vector<std::vector<std::vector<TokenId>>> encoded(corpus.size());
  for (size_t i = 0; i < corpus.size(); ++i) {
    encoded[i] = ToTrainingSequences(Tokenize(corpus[i].text(), vocab).ids, options.max_seq_len);
    if (!encoded[i].empty()) usable.push_back(i);
  }

  // Groups of example indices that must land on the same client.
  std::vector<std::vector<size_t>> groups;
  Rng rng = MakeRng(options.seed, StreamTag::kPartition);
  if (options.mode == PartitionMode::kIid) {
    std::shuffle(usable.begin(), usable.end(), rng);
    for (size_t i : usable) groups.push_back({i});
  } else {
    std::map<std::string, std::vector<size_t>> by_key;
    std::map<std::string, std::string> topic_of;
    for (size_t i : usable) {
      const Meta& m = corpus[i].meta();
      std::string key;
      if (auto it = m.find("conv_id"); it != m.end()) {
        key = it->second;
      } else if (auto jt = m.find("parent_id"); jt != m.end()) {
        key = jt->second;
      } else {
        key = absl::StrCat("#", i);
      }
      by_key[key].push_back(i);
      auto t = m.find("topic");
      topic_of.emplace(key, t == m.end() ? "" : t->second);
    }
    std::vector<std::string> keys;
    for (const auto& [k, v] : by_key) keys.push_back(k);
    std::shuffle(keys.begin(), keys.end(), rng);
    std::stable_sort(keys.begin(), keys.end(), [&](const std::string& a, const std::string& b) {
      return topic_of[a] < topic_of[b];
    });
    for (const std::string& k : keys) groups.push_back(by_key[k]);
  }

  const size_t n = static_cast<size_t>(options.num_clients);
  if (groups.size() < n) {
    return absl::InvalidArgumentError(absl::StrCat("cannot give ", n, " clients data from ",
                                                   groups.size(), " usable groups"));
  }
  std::vector<ClientDataset> clients(n);
  for (size_t c = 0; c < n; ++c) clients[c].client_id = static_cast<int>(c);
  for (size_t g = 0; g < groups.size(); ++g) {
    const size_t c = options.mode == PartitionMode::kIid ? g % n : g * n / groups.size();
    for (size_t i : groups[g]) {
      clients[c].example_indices.push_back(i);
      for (auto& seq : encoded[i]) {
        clients[c].weight += static_cast<int64_t>(seq.size()) - 1;
        clients[c].sequences.push_back(std::move(seq));
      }
    }
  }
  return clients;
}

}  // namespace fedsynth
