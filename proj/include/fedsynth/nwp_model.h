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
// Next-word-prediction language model: word embedding, one-layer LSTM and a
// softmax output layer, with exact backpropagation through time and Adam.
//
// Parameter layout (one flat vector, row-major blocks in this order):
//   embedding       V x D
//   lstm weights    4H x (D + H)   gate rows ordered input, forget, cell, output
//   lstm bias       4H
//   output weights  V x H
//   output bias     V
// so ParameterCount = V*D + 4H*(D+H) + 4H + V*H + V.

#ifndef FEDSYNTH_NWP_MODEL_H_
#define FEDSYNTH_NWP_MODEL_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "fedsynth/corpus.h"

namespace fedsynth {

struct ModelConfig {
  int vocab_size = 2000;
  int embed_dim = 16;
  int hidden_dim = 32;
  int max_seq_len = 32;

  absl::Status Validate() const;
  size_t ParameterCount() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

class ModelParameters {
 public:
  static ModelParameters Zeros(const ModelConfig& config);
  // Uniform(-0.05, 0.05) everywhere, forget-gate bias 1.0.
  static ModelParameters Initialize(const ModelConfig& config, uint64_t seed);
  static absl::StatusOr<ModelParameters> FromFlat(const ModelConfig& config,
                                                  std::vector<double> values);

  const ModelConfig& config() const { return config_; }
  std::span<double> flat() { return values_; }
  std::span<const double> flat() const { return values_; }
  size_t size() const { return values_.size(); }

  std::span<double> embedding() { return Block(kEmbedding); }
  std::span<double> lstm_weights() { return Block(kLstmWeights); }
  std::span<double> lstm_bias() { return Block(kLstmBias); }
  std::span<double> output_weights() { return Block(kOutputWeights); }
  std::span<double> output_bias() { return Block(kOutputBias); }
  std::span<const double> embedding() const { return Block(kEmbedding); }
  std::span<const double> lstm_weights() const { return Block(kLstmWeights); }
  std::span<const double> lstm_bias() const { return Block(kLstmBias); }
  std::span<const double> output_weights() const { return Block(kOutputWeights); }
  std::span<const double> output_bias() const { return Block(kOutputBias); }

  bool AllFinite() const;

 private:
  enum BlockId { kEmbedding, kLstmWeights, kLstmBias, kOutputWeights, kOutputBias };

  explicit ModelParameters(const ModelConfig& config);
  std::span<double> Block(BlockId id) { return {values_.data() + offsets_[id], sizes_[id]}; }
  std::span<const double> Block(BlockId id) const {
    return {values_.data() + offsets_[id], sizes_[id]};
  }

  ModelConfig config_;
  size_t offsets_[5] = {};
  size_t sizes_[5] = {};
  std::vector<double> values_;
};

// Row i holds log-probabilities of the token following ids[i].
struct LogProbs {
  int positions = 0;
  int vocab = 0;
  std::vector<double> values;

  std::span<const double> Row(int i) const {
    return {values.data() + static_cast<size_t>(i) * vocab, static_cast<size_t>(vocab)};
  }
};

absl::StatusOr<LogProbs> Forward(const ModelParameters& params,
                                 std::span<const TokenId> ids);

struct LossAndGradient {
  double loss = 0.0;        // mean cross-entropy over predicted positions
  int64_t positions = 0;
  ModelParameters gradient;
};

// Exact gradient of the mean next-token cross-entropy over every position of
// every sequence. Sequences are reduced in fixed chunks so the result does not
// depend on `workers`.
absl::StatusOr<LossAndGradient> ComputeLossAndGradient(
    const ModelParameters& params, std::span<const std::vector<TokenId>> batch,
    int workers = 1);

struct AccuracyCounts {
  int64_t correct = 0;
  int64_t total = 0;

  double Accuracy() const {
    return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
  }
  AccuracyCounts& operator+=(const AccuracyCounts& o) {
    correct += o.correct;
    total += o.total;
    return *this;
  }
};

// Argmax prediction at each position; ties go to the lowest token id.
// Sequences shorter than two tokens contribute nothing.
absl::StatusOr<AccuracyCounts> NwpAccuracy(const ModelParameters& params,
                                           std::span<const std::vector<TokenId>> sequences);

// Mean natural-log probability of each true next token; requires >= 2 tokens.
absl::StatusOr<double> AvgLogLikelihood(const ModelParameters& params,
                                        std::span<const TokenId> ids);

struct AdamOptions {
  double learning_rate = 0.001;
  double epsilon = 1e-9;
  double beta1 = 0.9;
  double beta2 = 0.999;
};

struct AdamState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  int64_t step = 0;

  static AdamState For(const ModelParameters& params);
};

// Bias-corrected Adam. A non-finite gradient is rejected before any state
// changes.
absl::Status AdamStep(ModelParameters& params, const ModelParameters& gradient,
                      AdamState& state, const AdamOptions& options);

// Splits a token sequence into windows of at most max_len tokens that overlap
// by one token, so every next-word target is kept. Windows shorter than two
// tokens are dropped.
std::vector<std::vector<TokenId>> ToTrainingSequences(std::span<const TokenId> ids,
                                                      int max_len);

std::vector<std::vector<TokenId>> EncodeCorpus(std::span<const Example> corpus,
                                               const Vocabulary& vocab, int max_len);

// Binary checkpoint:
//   8 bytes  magic "FSNWPCK1"
//   4 bytes  little-endian uint32 header length N
//   N bytes  JSON header {"format_version":1,"vocab_size":..,"embed_dim":..,
//                          "hidden_dim":..,"max_seq_len":..,"parameter_count":..}
//   8 bytes  little-endian uint64 parameter count P
//   8P bytes IEEE-754 little-endian doubles in flat layout order
absl::Status SaveCheckpoint(const std::string& path, const ModelParameters& params);
absl::StatusOr<ModelParameters> LoadCheckpoint(const std::string& path);

// First 16 hex digits of SHA-256 over config and parameter bytes.
std::string CheckpointId(const ModelParameters& params);

}  // namespace fedsynth

#endif  // FEDSYNTH_NWP_MODEL_H_
