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
// Centralized pre-training on public (server-side) data.

#ifndef FEDSYNTH_PRETRAIN_H_
#define FEDSYNTH_PRETRAIN_H_

#include <cstdint>
#include <vector>

#include "absl/status/statusor.h"
#include "fedsynth/nwp_model.h"

namespace fedsynth {

struct PretrainOptions {
  int steps = 1200;
  int batch_size = 32;
  AdamOptions adam;
  uint64_t seed = 0;
  int workers = 1;
};

struct PretrainResult {
  ModelParameters params;
  std::vector<double> losses;  // one per step
};

// Minibatch Adam from `init`. Batches walk a fresh shuffle of the sequences
// every epoch; the shuffle stream depends only on (seed, epoch).
absl::StatusOr<PretrainResult> Pretrain(ModelParameters init,
                                        const std::vector<std::vector<TokenId>>& sequences,
                                        const PretrainOptions& options);

}  // namespace fedsynth

#endif  // FEDSYNTH_PRETRAIN_H_
