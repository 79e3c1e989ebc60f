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
// Cross-device federated training with tree-aggregated (DP-FTRL style)
// noisy prefix sums, client delta clipping, minimum-separation client
// sampling and server momentum. Also federated evaluation and the simulated
// private client population.

#ifndef FEDSYNTH_FL_DP_H_
#define FEDSYNTH_FL_DP_H_

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "fedsynth/corpus.h"
#include "fedsynth/nwp_model.h"
#include "fedsynth/random.h"
#include "json.hpp"

namespace fedsynth {

struct ClientDataset {
  int client_id = 0;
  std::vector<std::vector<TokenId>> sequences;
  int64_t weight = 0;                  // predicted positions
  std::vector<size_t> example_indices;  // into the partitioned corpus
};

struct RoundConfig {
  int clients_per_round = 10;
  double client_lr = 0.5;
  double server_lr = 1.0;
  double momentum = 0.9;
  int total_rounds = 200;
  double noise_multiplier = 0.0;
  double clip_norm = 1.0;
  int min_separation = 1;
  int max_participations = 0;  // 0 = unlimited
  int local_epochs = 1;
  int local_batch_size = 16;
  uint64_t seed = 0;
  int workers = 1;

  absl::Status Validate() const;
  // Per-coordinate std of every tree node on the averaged delta: z*C/m.
  double NodeStd() const;
};

// Scales x in place by min(1, C/||x||). Returns the norm before clipping.
// Vectors already within the bound are left untouched.
double ClipDelta(std::span<double> x, double clip_norm);
double L2Norm(std::span<const double> x);

struct ClientResult {
  std::vector<double> delta;  // clipped; empty when dropped
  double pre_clip_norm = 0.0;
  double post_clip_norm = 0.0;
  bool dropped = false;
};

// Local SGD over the client's sequences from `global`, then clipping. The
// shuffle stream is addressed by (seed, round, client_id). A non-finite
// loss drops the client.
ClientResult ClientUpdate(const ModelParameters& global, const ClientDataset& client,
                          const RoundConfig& cfg, int64_t round);

// Online binary-tree prefix sums. Round t (1-based) is covered by one node
// per set bit of t: the node at level l has index t >> l and spans 2^l
// rounds. Node noise is drawn once from its own stream and reused by every
// prefix that contains it.
class TreeAggregator {
 public:
  TreeAggregator(size_t dim, double node_std, uint64_t seed);

  // Adds x_t and returns P^t = sum_{s<=t} x_s + noise of the covering nodes.
  std::span<const double> Add(std::span<const double> x);

  int64_t rounds() const { return rounds_; }
  double node_std() const { return node_std_; }
  std::span<const double> exact_prefix() const { return prefix_; }

  struct NodeKey {
    int level = 0;
    int64_t index = 0;
    friend auto operator<=>(const NodeKey&, const NodeKey&) = default;
  };
  static std::vector<NodeKey> CoveringNodes(int64_t t);
  // Noise of a live node; nullopt when the node is not in the current prefix.
  std::optional<std::span<const double>> NodeNoise(NodeKey key) const;
  size_t LiveNodes() const { return live_.size(); }

 private:
  std::vector<double> SampleNode(NodeKey key) const;

  size_t dim_;
  double node_std_;
  uint64_t seed_;
  int64_t rounds_ = 0;
  std::vector<double> prefix_;
  std::vector<double> noisy_;
  std::map<NodeKey, std::vector<double>> live_;
};

class ParticipationTracker {
 public:
  ParticipationTracker(int min_separation, int max_participations)
      : min_separation_(min_separation), max_participations_(max_participations) {}

  bool Eligible(int client_id, int64_t round) const;
  // Fails if the client is not eligible.
  absl::Status Record(int client_id, int64_t round);
  int64_t Count(int client_id) const;
  int64_t MaxCount() const;
  const std::map<int, std::vector<int64_t>>& history() const { return history_; }

 private:
  int min_separation_;
  int max_participations_;
  std::map<int, std::vector<int64_t>> history_;
};

// m ids drawn uniformly without replacement, returned sorted.
std::vector<int> SampleClients(std::vector<int> eligible, int m, Rng& rng);

struct RoundMetrics {
  int64_t round = 0;
  int eligible = 0;
  int sampled = 0;
  int dropped = 0;
  double pre_clip_min = 0, pre_clip_median = 0, pre_clip_max = 0;
  double post_clip_min = 0, post_clip_median = 0, post_clip_max = 0;
  double clipped_fraction = 0;
  double noise_std = 0;
  std::optional<double> eval_accuracy;
  std::optional<double> eval_stddev;

  nlohmann::json ToJson() const;
};

class FederatedTrainer {
 public:
  // `population` must outlive the trainer.
  static absl::StatusOr<FederatedTrainer> Create(ModelParameters initial,
                                                 const std::vector<ClientDataset>* population,
                                                 const RoundConfig& cfg);

  // One round of the algorithm. FailedPrecondition
  // ("insufficient_eligible_clients") when fewer than m clients may take part.
  absl::StatusOr<RoundMetrics> Step();

  const ModelParameters& weights() const { return weights_; }
  int64_t round() const { return round_; }
  const ParticipationTracker& tracker() const { return tracker_; }
  const TreeAggregator& tree() const { return tree_; }
  std::span<const double> momentum() const { return momentum_; }

 private:
  FederatedTrainer(ModelParameters initial, const std::vector<ClientDataset>* population,
                   const RoundConfig& cfg);

  RoundConfig cfg_;
  const std::vector<ClientDataset>* population_;
  ModelParameters initial_;
  ModelParameters weights_;
  std::vector<double> momentum_;
  TreeAggregator tree_;
  ParticipationTracker tracker_;
  int64_t round_ = 0;
};

struct EvalConfig {
  int runs = 3;
  int rounds_per_run = 1;
  int clients_per_round = 0;  // 0 = every device each round
  int min_separation = 1;
  uint64_t seed = 0;
  int workers = 1;
};

struct EvalResult {
  std::vector<double> run_accuracy;
  double mean = 0.0;
  double stddev = 0.0;  // sample std over runs; 0 for a single run
};

// Each run samples devices round by round (no device twice within
// min_separation rounds of the same run) and pools correct/total counts.
absl::StatusOr<EvalResult> FederatedEval(const ModelParameters& params,
                                         const std::vector<ClientDataset>& population,
                                         const EvalConfig& cfg);

// Pooled accuracy over every sequence of every client.
absl::StatusOr<AccuracyCounts> CentralAccuracy(const ModelParameters& params,
                                               const std::vector<ClientDataset>& population,
                                               int workers = 1);

struct TrainingSchedule {
  int eval_every = 0;  // 0 = no periodic eval
  bool eval_at_start = true;
  EvalConfig eval;
};

struct TrainingResult {
  ModelParameters final_weights;
  std::vector<RoundMetrics> rounds;
  // (round, mean accuracy, std) at every scheduled evaluation.
  struct EvalPoint {
    int64_t round;
    double mean;
    double stddev;
  };
  std::vector<EvalPoint> curve;
  ParticipationTracker tracker;
};

absl::StatusOr<TrainingResult> RunFederatedTraining(
    ModelParameters initial, const std::vector<ClientDataset>& population,
    const std::vector<ClientDataset>* eval_population, const RoundConfig& cfg,
    const TrainingSchedule& schedule,
    const std::function<void(const RoundMetrics&, const ModelParameters&)>& on_round = {});

enum class PartitionMode { kIid, kSkewed };
absl::StatusOr<PartitionMode> ParsePartitionMode(std::string_view name);

struct PartitionOptions {
  int num_clients = 100;
  PartitionMode mode = PartitionMode::kSkewed;
  int max_seq_len = 32;
  uint64_t seed = 0;
};

// Examples with fewer than two tokens are skipped. kIid deals shuffled
// examples round-robin. kSkewed keeps each conversation (meta conv_id, else
// parent_id) on one client and gives clients contiguous runs of
// topic-sorted conversations. Every client ends up non-empty or the call
// fails.
absl::StatusOr<std::vector<ClientDataset>> PartitionPrivateCorpus(
    std::span<const Example> corpus, const Vocabulary& vocab, const PartitionOptions& options);

}  // namespace fedsynth

#endif  // FEDSYNTH_FL_DP_H_
