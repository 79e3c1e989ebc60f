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
#include "fedsynth/pretrain.h"

#include <algorithm>
#include <numeric>

#include "fedsynth/random.h"

namespace fedsynth {

absl::StatusOr<PretrainResult> Pretrain(ModelParameters init,
                                        const std::vector<std::vector<TokenId>>& sequences,
                                        const PretrainOptions& options) {
  if (sequences.empty()) return absl::InvalidArgumentError("no pre-training sequences");
  if (options.steps < 0 || options.batch_size < 1) {
    return absl::InvalidArgumentError("pretrain needs steps >= 0 and batch_size >= 1");
  }
  PretrainResult result{std::move(init), {}};
  AdamState state = AdamState::For(result.params);
  std::vector<size_t> order(sequences.size());
  size_t cursor = order.size();
  uint64_t epoch = 0;
  std::vector<std::vector<TokenId>> batch;
  for (int step = 0; step < options.steps; ++step) {
    batch.clear();
    while (static_cast<int>(batch.size()) < options.batch_size) {
      if (cursor == order.size()) {
        std::iota(order.begin(), order.end(), size_t{0});
        Rng rng = MakeRng(options.seed, StreamTag::kPretrainBatches, {epoch++});
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      batch.push_back(sequences[order[cursor++]]);
      if (static_cast<size_t>(options.batch_size) > sequences.size() &&
          batch.size() == sequences.size()) {
        break;  // tiny corpus: one pass is a full batch
      }
    }
    auto lg = ComputeLossAndGradient(result.params, batch, options.workers);
    if (!lg.ok()) return lg.status();
    if (absl::Status s = AdamStep(result.params, lg->gradient, state, options.adam); !s.ok()) {
      return s;
    }
    result.losses.push_back(lg->loss);
  }
  return result;
}

}  // namespace fedsynth
