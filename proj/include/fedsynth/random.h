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
#ifndef FEDSYNTH_RANDOM_H_
#define FEDSYNTH_RANDOM_H_

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace fedsynth {

using Rng = std::mt19937_64;

// Stream tags for seed derivation. Each independent random stream in the
// library is addressed by (root seed, tag, ...counters) so results never
// depend on call order or thread interleaving.
enum class StreamTag : uint64_t {
  kModelInit = 1,
  kClientSampling = 2,
  kClientUpdate = 3,
  kTreeNoise = 4,
  kEvalSampling = 5,
  kPartition = 6,
  kPretrainBatches = 7,
  kSynthesis = 8,
  kMockBackend = 9,
};

inline uint64_t SplitMix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t DeriveSeed(uint64_t root, StreamTag tag,
                           std::initializer_list<uint64_t> counters = {}) {
  uint64_t h = SplitMix64(root ^ SplitMix64(static_cast<uint64_t>(tag)));
  for (uint64_t c : counters) h = SplitMix64(h ^ SplitMix64(c + 0x632be59bd9b4e019ULL));
  return h;
}

inline Rng MakeRng(uint64_t root, StreamTag tag,
                   std::initializer_list<uint64_t> counters = {}) {
  return Rng(DeriveSeed(root, tag, counters));
}

// FNV-1a; used for content-derived seeds, not for integrity.
inline uint64_t Fingerprint(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace fedsynth

#endif  // FEDSYNTH_RANDOM_H_
