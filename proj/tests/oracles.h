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
// Independent reference computations shared by the unit tests and the
// acceptance binary.

#ifndef FEDSYNTH_TESTS_ORACLES_H_
#define FEDSYNTH_TESTS_ORACLES_H_

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "fedsynth/corpus.h"
#include "fedsynth/fl_dp.h"
#include "fedsynth/nwp_model.h"
#include "fedsynth/random.h"

namespace fedsynth::testing {

// ---- corpus metrics ------------------------------------------------------

// Lowercase words joined by single spaces, so tokenization is a plain split.
struct RandomCorpusCase {
  Corpus corpus;
  std::vector<std::string> vocab_words;  // without OOV
  std::vector<std::vector<std::string>> tokens;
};

inline RandomCorpusCase MakeRandomCorpus(uint64_t seed) {
  Rng rng(seed);
  std::uniform_int_distribution<int> len(1, 6);
  std::uniform_int_distribution<int> letter(0, 4);  // small alphabet: collisions
  auto word = [&] {
    std::string w;
    for (int i = len(rng) % 3 + 1; i > 0; --i) w.push_back(static_cast<char>('a' + letter(rng)));
    return w;
  };
  RandomCorpusCase rc;
  std::set<std::string> vocab_set;
  const int vocab_target = std::uniform_int_distribution<int>(1, 40)(rng);
  for (int i = 0; i < vocab_target * 3 && static_cast<int>(vocab_set.size()) < vocab_target; ++i) {
    vocab_set.insert(word());
  }
  rc.vocab_words.assign(vocab_set.begin(), vocab_set.end());
  const int n = std::uniform_int_distribution<int>(0, 30)(rng);
  for (int e = 0; e < n; ++e) {
    std::vector<std::string> toks;
    std::string text;
    for (int k = len(rng) + len(rng); k > 0; --k) {
      toks.push_back(word());
      if (!text.empty()) text += ' ';
      text += toks.back();
    }
    rc.tokens.push_back(toks);
    rc.corpus.push_back(*Example::Create(text, Source::kRaw));
  }
  return rc;
}

// For each vocabulary word, scan every token of every example.
inline double BruteForceCoverage(const RandomCorpusCase& rc) {
  if (rc.vocab_words.empty()) return 0.0;
  int64_t seen = 0;
  for (const std::string& w : rc.vocab_words) {
    bool found = false;
    for (const auto& toks : rc.tokens) {
      for (const std::string& t : toks) found = found || t == w;
    }
    seen += found;
  }
  return static_cast<double>(seen) / static_cast<double>(rc.vocab_words.size());
}

inline double BruteForceOovRate(const RandomCorpusCase& rc, size_t example) {
  int64_t oov = 0;
  for (const std::string& t : rc.tokens[example]) {
    oov += std::find(rc.vocab_words.begin(), rc.vocab_words.end(), t) == rc.vocab_words.end();
  }
  return static_cast<double>(oov) / static_cast<double>(rc.tokens[example].size());
}

// Vocabulary over rc.vocab_words with OOV inserted at a seed-dependent slot.
inline Vocabulary VocabularyFor(const RandomCorpusCase& rc, uint64_t seed) {
  std::vector<std::string> words = rc.vocab_words;
  const size_t slot = seed % (words.size() + 1);
  words.insert(words.begin() + static_cast<long>(slot), std::string(Vocabulary::kOovToken));
  return *Vocabulary::Create(words, static_cast<TokenId>(slot));
}

// ---- gradients -----------------------------------------------------------

// Mean next-token cross-entropy from Forward() alone.
inline double LossFromForward(const ModelParameters& params,
                              const std::vector<std::vector<TokenId>>& batch) {
  double total = 0.0;
  int64_t n = 0;
  for (const auto& seq : batch) {
    LogProbs lp = *Forward(params, seq);
    for (int i = 0; i + 1 < static_cast<int>(seq.size()); ++i) {
      total -= lp.Row(i)[seq[i + 1]];
      ++n;
    }
  }
  return total / static_cast<double>(n);
}

struct GradCheck {
  double max_rel_error = 0.0;
  size_t checked = 0;
};

// Central differences with step h against the analytic gradient, for every
// parameter. Relative error |a - n| / max(|a|, |n|, floor).
inline GradCheck CheckGradient(const ModelConfig& config, uint64_t seed, double h = 1e-4,
                               double floor = 1e-6) {
  ModelParameters params = ModelParameters::Initialize(config, seed);
  // Larger weights than the default init so every gate is exercised away
  // from the linear regime.
  Rng rng(seed ^ 0x5eedULL);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (double& v : params.flat()) v += u(rng);
  std::uniform_int_distribution<TokenId> tok(0, config.vocab_size - 1);
  std::uniform_int_distribution<int> len(2, std::min(7, config.max_seq_len));
  std::vector<std::vector<TokenId>> batch(3);
  for (auto& seq : batch) {
    seq.resize(static_cast<size_t>(len(rng)));
    for (TokenId& t : seq) t = tok(rng);
  }
  const LossAndGradient lg = *ComputeLossAndGradient(params, batch, 1);
  GradCheck out;
  std::span<double> w = params.flat();
  for (size_t i = 0; i < w.size(); ++i) {
    const double saved = w[i];
    w[i] = saved + h;
    const double up = LossFromForward(params, batch);
    w[i] = saved - h;
    const double down = LossFromForward(params, batch);
    w[i] = saved;
    const double numeric = (up - down) / (2 * h);
    const double analytic = lg.gradient.flat()[i];
    const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
    out.max_rel_error = std::max(out.max_rel_error, std::abs(analytic - numeric) / denom);
    ++out.checked;
  }
  return out;
}

// ---- federated training --------------------------------------------------

// Small synthetic population: each client favours its own slice of the
// vocabulary so updates differ across clients.
inline std::vector<ClientDataset> SyntheticPopulation(int clients, int vocab, uint64_t seed) {
  std::vector<ClientDataset> pop(static_cast<size_t>(clients));
  Rng rng(seed);
  for (int c = 0; c < clients; ++c) {
    ClientDataset& d = pop[static_cast<size_t>(c)];
    d.client_id = c;
    const int n = std::uniform_int_distribution<int>(2, 6)(rng);
    for (int s = 0; s < n; ++s) {
      std::vector<TokenId> seq(static_cast<size_t>(std::uniform_int_distribution<int>(3, 9)(rng)));
      for (TokenId& t : seq) {
        t = std::bernoulli_distribution(0.7)(rng)
                ? static_cast<TokenId>((c * 3 + std::uniform_int_distribution<int>(0, 3)(rng)) % vocab)
                : std::uniform_int_distribution<TokenId>(0, vocab - 1)(rng);
      }
      d.weight += static_cast<int64_t>(seq.size()) - 1;
      d.sequences.push_back(std::move(seq));
    }
  }
  return pop;
}

// Plain FedAvg with server momentum, no clipping and no noise: clients run
// local SGD from the current global model, the server averages deltas over
// the m sampled clients and applies a momentum step. The momentum is kept
// in accumulated form, v_t = beta * v_{t-1} + (sum of all averaged deltas
// so far), w_t = w_0 + lr * v_t, which telescopes to the usual
// w_t = w_{t-1} + lr * (beta * u_{t-1} + avg_t) heavy-ball recursion.
inline std::vector<double> ReferenceFedAvg(const ModelParameters& initial,
                                           const std::vector<ClientDataset>& pop,
                                           const RoundConfig& cfg, bool heavy_ball = false) {
  ModelParameters w = initial;
  const size_t dim = w.size();
  std::vector<double> sum(dim, 0.0), v(dim, 0.0), u(dim, 0.0);
  std::map<int, std::vector<int64_t>> seen;
  for (int64_t t = 1; t <= cfg.total_rounds; ++t) {
    std::vector<int> ids;
    for (const ClientDataset& c : pop) {
      auto it = seen.find(c.client_id);
      bool ok = it == seen.end() ||
                t - it->second.back() >= static_cast<int64_t>(cfg.min_separation);
      if (ok && it != seen.end() && cfg.max_participations > 0 &&
          static_cast<int>(it->second.size()) >= cfg.max_participations) {
        ok = false;
      }
      if (ok) ids.push_back(c.client_id);
    }
    std::sort(ids.begin(), ids.end());
    Rng pick = MakeRng(cfg.seed, StreamTag::kClientSampling, {static_cast<uint64_t>(t)});
    std::shuffle(ids.begin(), ids.end(), pick);
    ids.resize(static_cast<size_t>(cfg.clients_per_round));
    std::sort(ids.begin(), ids.end());

    std::vector<double> avg(dim, 0.0);
    for (int id : ids) {
      seen[id].push_back(t);
      const ClientDataset& c = pop[static_cast<size_t>(id)];
      ModelParameters local = w;
      Rng order_rng = MakeRng(cfg.seed, StreamTag::kClientUpdate,
                              {static_cast<uint64_t>(t), static_cast<uint64_t>(id)});
      std::vector<size_t> order(c.sequences.size());
      for (int e = 0; e < cfg.local_epochs; ++e) {
        std::iota(order.begin(), order.end(), size_t{0});
        std::shuffle(order.begin(), order.end(), order_rng);
        for (size_t b = 0; b < order.size(); b += static_cast<size_t>(cfg.local_batch_size)) {
          std::vector<std::vector<TokenId>> batch;
          for (size_t k = b; k < std::min(order.size(), b + cfg.local_batch_size); ++k) {
            batch.push_back(c.sequences[order[k]]);
          }
          const LossAndGradient g = *ComputeLossAndGradient(local, batch, 1);
          for (size_t k = 0; k < dim; ++k) local.flat()[k] -= cfg.client_lr * g.gradient.flat()[k];
        }
      }
      for (size_t k = 0; k < dim; ++k) avg[k] += local.flat()[k] - w.flat()[k];
    }
    for (double& a : avg) a /= static_cast<double>(cfg.clients_per_round);

    if (heavy_ball) {
      for (size_t k = 0; k < dim; ++k) {
        u[k] = cfg.momentum * u[k] + avg[k];
        w.flat()[k] += cfg.server_lr * u[k];
      }
    } else {
      for (size_t k = 0; k < dim; ++k) {
        sum[k] += avg[k];
        v[k] = cfg.momentum * v[k] + sum[k];
        w.flat()[k] = initial.flat()[k] + cfg.server_lr * v[k];
      }
    }
  }
  return {w.flat().begin(), w.flat().end()};
}

}  // namespace fedsynth::testing

#endif  // FEDSYNTH_TESTS_ORACLES_H_
