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
#include "fedsynth/nwp_model.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "absl/strings/str_cat.h"
#include "fedsynth/hash.h"
#include "fedsynth/parallel.h"
#include "fedsynth/random.h"
#include "json.hpp"

namespace fedsynth {
namespace {

// Sequences per reduction chunk. Fixed so gradients are bitwise independent
// of the worker count.
constexpr size_t kChunkSize = 8;

constexpr char kCheckpointMagic[8] = {'F', 'S', 'N', 'W', 'P', 'C', 'K', '1'};
constexpr int kCheckpointVersion = 1;

inline double Sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double Dot(const double* a, const double* b, int n) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

// Activations for one sequence, one row per processed position.
struct Trace {
  int steps = 0;
  int d = 0, h = 0, v = 0;
  std::vector<double> xh;     // steps x (D + H): [embedding; previous h]
  std::vector<double> gates;  // steps x 4H: post-activation i, f, g, o
  std::vector<double> cell;   // steps x H
  std::vector<double> tanh_cell;
  std::vector<double> hidden;
  std::vector<double> probs;  // steps x V (only when requested)

  void Resize(int n, int dim_d, int dim_h, int dim_v, bool keep_probs) {
    steps = n;
    d = dim_d;
    h = dim_h;
    v = dim_v;
    xh.assign(static_cast<size_t>(n) * (d + h), 0.0);
    gates.assign(static_cast<size_t>(n) * 4 * h, 0.0);
    cell.assign(static_cast<size_t>(n) * h, 0.0);
    tanh_cell.assign(static_cast<size_t>(n) * h, 0.0);
    hidden.assign(static_cast<size_t>(n) * h, 0.0);
    probs.assign(keep_probs ? static_cast<size_t>(n) * v : 0, 0.0);
  }
};

// Runs the LSTM over ids[0..steps) and fills the trace. After step t,
// `on_logits(t, logits)` sees the unnormalized output scores.
template <typename OnLogits>
void RunLstm(const ModelParameters& p, std::span<const TokenId> ids, int steps,
             Trace& tr, std::vector<double>& logits, OnLogits&& on_logits) {
  const ModelConfig& cfg = p.config();
  const int D = cfg.embed_dim, H = cfg.hidden_dim, V = cfg.vocab_size;
  const int X = D + H;
  const double* emb = p.embedding().data();
  const double* w = p.lstm_weights().data();
  const double* b = p.lstm_bias().data();
  const double* wo = p.output_weights().data();
  const double* bo = p.output_bias().data();
  logits.resize(V);
  std::vector<double> z(4 * H);

  for (int t = 0; t < steps; ++t) {
    double* xh = &tr.xh[static_cast<size_t>(t) * X];
    std::memcpy(xh, emb + static_cast<size_t>(ids[t]) * D, sizeof(double) * D);
    if (t > 0) {
      std::memcpy(xh + D, &tr.hidden[static_cast<size_t>(t - 1) * H], sizeof(double) * H);
    }
    for (int r = 0; r < 4 * H; ++r) z[r] = b[r] + Dot(w + static_cast<size_t>(r) * X, xh, X);

    double* g = &tr.gates[static_cast<size_t>(t) * 4 * H];
    double* c = &tr.cell[static_cast<size_t>(t) * H];
    double* tc = &tr.tanh_cell[static_cast<size_t>(t) * H];
    double* hid = &tr.hidden[static_cast<size_t>(t) * H];
    const double* c_prev = t > 0 ? &tr.cell[static_cast<size_t>(t - 1) * H] : nullptr;
    for (int j = 0; j < H; ++j) {
      const double ig = Sigmoid(z[j]);
      const double fg = Sigmoid(z[H + j]);
      const double cg = std::tanh(z[2 * H + j]);
      const double og = Sigmoid(z[3 * H + j]);
      g[j] = ig;
      g[H + j] = fg;
      g[2 * H + j] = cg;
      g[3 * H + j] = og;
      c[j] = (c_prev ? fg * c_prev[j] : 0.0) + ig * cg;
      tc[j] = std::tanh(c[j]);
      hid[j] = og * tc[j];
    }
    for (int k = 0; k < V; ++k) logits[k] = bo[k] + Dot(wo + static_cast<size_t>(k) * H, hid, H);
    on_logits(t, std::span<const double>(logits));
  }
}

double LogSumExp(std::span<const double> x) {
  const double m = *std::max_element(x.begin(), x.end());
  double s = 0.0;
  for (double v : x) s += std::exp(v - m);
  return m + std::log(s);
}

absl::Status CheckIds(std::span<const TokenId> ids, int vocab_size) {
  for (TokenId id : ids) {
    if (id < 0 || id >= vocab_size) {
      return absl::OutOfRangeError(absl::StrCat("token id ", id, " outside vocabulary of ",
                                                vocab_size));
    }
  }
  return absl::OkStatus();
}

// Adds the unnormalized (sum over positions) gradient of one sequence to
// `grad` and returns the summed negative log-likelihood.
double AccumulateSequence(const ModelParameters& p, std::span<const TokenId> ids,
                          ModelParameters& grad, Trace& tr, std::vector<double>& logits) {
  const ModelConfig& cfg = p.config();
  const int D = cfg.embed_dim, H = cfg.hidden_dim, V = cfg.vocab_size;
  const int X = D + H;
  const int steps = static_cast<int>(ids.size()) - 1;
  tr.Resize(steps, D, H, V, /*keep_probs=*/true);

  double nll = 0.0;
  RunLstm(p, ids, steps, tr, logits, [&](int t, std::span<const double> lg) {
    const double lse = LogSumExp(lg);
    double* pr = &tr.probs[static_cast<size_t>(t) * V];
    for (int k = 0; k < V; ++k) pr[k] = std::exp(lg[k] - lse);
    nll -= lg[ids[t + 1]] - lse;
  });

  const double* w = p.lstm_weights().data();
  const double* wo = p.output_weights().data();
  double* g_emb = grad.embedding().data();
  double* g_w = grad.lstm_weights().data();
  double* g_b = grad.lstm_bias().data();
  double* g_wo = grad.output_weights().data();
  double* g_bo = grad.output_bias().data();

  std::vector<double> dh(H), dc_next(H, 0.0), dh_next(H, 0.0), dz(4 * H), dxh(X);
  for (int t = steps - 1; t >= 0; --t) {
    const double* pr = &tr.probs[static_cast<size_t>(t) * V];
    const double* hid = &tr.hidden[static_cast<size_t>(t) * H];
    const TokenId target = ids[t + 1];

    dh = dh_next;
    for (int k = 0; k < V; ++k) {
      const double dl = pr[k] - (k == target ? 1.0 : 0.0);
      g_bo[k] += dl;
      double* gwo_row = g_wo + static_cast<size_t>(k) * H;
      const double* wo_row = wo + static_cast<size_t>(k) * H;
      for (int j = 0; j < H; ++j) {
        gwo_row[j] += dl * hid[j];
        dh[j] += dl * wo_row[j];
      }
    }

    const double* g = &tr.gates[static_cast<size_t>(t) * 4 * H];
    const double* tc = &tr.tanh_cell[static_cast<size_t>(t) * H];
    const double* c_prev = t > 0 ? &tr.cell[static_cast<size_t>(t - 1) * H] : nullptr;
    for (int j = 0; j < H; ++j) {
      const double ig = g[j], fg = g[H + j], cg = g[2 * H + j], og = g[3 * H + j];
      const double dc = dh[j] * og * (1.0 - tc[j] * tc[j]) + dc_next[j];
      dz[j] = dc * cg * ig * (1.0 - ig);
      dz[H + j] = (c_prev ? dc * c_prev[j] : 0.0) * fg * (1.0 - fg);
      dz[2 * H + j] = dc * ig * (1.0 - cg * cg);
      dz[3 * H + j] = dh[j] * tc[j] * og * (1.0 - og);
      dc_next[j] = dc * fg;
    }

    const double* xh = &tr.xh[static_cast<size_t>(t) * X];
    std::fill(dxh.begin(), dxh.end(), 0.0);
    for (int r = 0; r < 4 * H; ++r) {
      const double d = dz[r];
      g_b[r] += d;
      double* gw_row = g_w + static_cast<size_t>(r) * X;
      const double* w_row = w + static_cast<size_t>(r) * X;
      for (int k = 0; k < X; ++k) {
        gw_row[k] += d * xh[k];
        dxh[k] += d * w_row[k];
      }
    }
    double* ge = g_emb + static_cast<size_t>(ids[t]) * D;
    for (int k = 0; k < D; ++k) ge[k] += dxh[k];
    for (int j = 0; j < H; ++j) dh_next[j] = dxh[D + j];
  }
  return nll;
}

void PutU32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void PutU64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
uint64_t GetLE(const unsigned char* p, int bytes) {
  uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<uint64_t>(p[i]) << (8 * i);
  return v;
}

std::string SerializeParameters(const ModelParameters& params) {
  const ModelConfig& c = params.config();
  const nlohmann::json header = {{"format_version", kCheckpointVersion},
                                 {"vocab_size", c.vocab_size},
                                 {"embed_dim", c.embed_dim},
                                 {"hidden_dim", c.hidden_dim},
                                 {"max_seq_len", c.max_seq_len},
                                 {"parameter_count", params.size()}};
  const std::string h = header.dump();
  std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
  PutU32(out, static_cast<uint32_t>(h.size()));
  out += h;
  PutU64(out, params.size());
  for (double v : params.flat()) PutU64(out, std::bit_cast<uint64_t>(v));
  return out;
}

}  // namespace

absl::Status ModelConfig::Validate() const {
  if (vocab_size < 1 || embed_dim < 1 || hidden_dim < 1 || max_seq_len < 2) {
    return absl::InvalidArgumentError(
        "model config needs vocab_size, embed_dim, hidden_dim >= 1 and max_seq_len >= 2");
  }
  return absl::OkStatus();
}

size_t ModelConfig::ParameterCount() const {
  const size_t V = vocab_size, D = embed_dim, H = hidden_dim;
  return V * D + 4 * H * (D + H) + 4 * H + V * H + V;
}

ModelParameters::ModelParameters(const ModelConfig& config) : config_(config) {
  const size_t V = config.vocab_size, D = config.embed_dim, H = config.hidden_dim;
  sizes_[kEmbedding] = V * D;
  sizes_[kLstmWeights] = 4 * H * (D + H);
  sizes_[kLstmBias] = 4 * H;
  sizes_[kOutputWeights] = V * H;
  sizes_[kOutputBias] = V;
  size_t off = 0;
  for (int i = 0; i < 5; ++i) {
    offsets_[i] = off;
    off += sizes_[i];
  }
  values_.assign(off, 0.0);
}

ModelParameters ModelParameters::Zeros(const ModelConfig& config) {
  return ModelParameters(config);
}

ModelParameters ModelParameters::Initialize(const ModelConfig& config, uint64_t seed) {
  ModelParameters p(config);
  Rng rng = MakeRng(seed, StreamTag::kModelInit);
  std::uniform_real_distribution<double> u(-0.05, 0.05);
  for (double& v : p.values_) v = u(rng);
  const int H = config.hidden_dim;
  std::span<double> bias = p.lstm_bias();
  for (int j = 0; j < H; ++j) bias[H + j] = 1.0;
  return p;
}

absl::StatusOr<ModelParameters> ModelParameters::FromFlat(const ModelConfig& config,
                                                          std::vector<double> values) {
  if (absl::Status s = config.Validate(); !s.ok()) return s;
  ModelParameters p(config);
  if (values.size() != p.values_.size()) {
    return absl::InvalidArgumentError(absl::StrCat("expected ", p.values_.size(),
                                                   " parameters, got ", values.size()));
  }
  p.values_ = std::move(values);
  if (!p.AllFinite()) return absl::InvalidArgumentError("non-finite parameter value");
  return p;
}

bool ModelParameters::AllFinite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

absl::StatusOr<LogProbs> Forward(const ModelParameters& params, std::span<const TokenId> ids) {
  const ModelConfig& cfg = params.config();
  if (absl::Status s = CheckIds(ids, cfg.vocab_size); !s.ok()) return s;
  LogProbs out;
  out.positions = static_cast<int>(ids.size());
  out.vocab = cfg.vocab_size;
  out.values.resize(ids.size() * static_cast<size_t>(cfg.vocab_size));
  Trace tr;
  tr.Resize(out.positions, cfg.embed_dim, cfg.hidden_dim, cfg.vocab_size, false);
  std::vector<double> logits;
  RunLstm(params, ids, out.positions, tr, logits, [&](int t, std::span<const double> lg) {
    const double lse = LogSumExp(lg);
    double* row = &out.values[static_cast<size_t>(t) * out.vocab];
    for (int k = 0; k < out.vocab; ++k) row[k] = lg[k] - lse;
  });
  return out;
}

absl::StatusOr<LossAndGradient> ComputeLossAndGradient(
    const ModelParameters& params, std::span<const std::vector<TokenId>> batch, int workers) {
  if (batch.empty()) return absl::InvalidArgumentError("empty batch");
  int64_t positions = 0;
  for (const auto& seq : batch) {
    if (seq.size() < 2) {
      return absl::InvalidArgumentError("every training sequence needs at least 2 tokens");
    }
    if (absl::Status s = CheckIds(seq, params.config().vocab_size); !s.ok()) return s;
    positions += static_cast<int64_t>(seq.size()) - 1;
  }

  const size_t chunks = (batch.size() + kChunkSize - 1) / kChunkSize;
  std::vector<ModelParameters> partial;
  std::vector<double> nll(chunks, 0.0);
  partial.reserve(chunks);
  for (size_t c = 0; c < chunks; ++c) partial.push_back(ModelParameters::Zeros(params.config()));
  ParallelFor(chunks, workers, [&](size_t c) {
    Trace tr;
    std::vector<double> logits;
    const size_t end = std::min(batch.size(), (c + 1) * kChunkSize);
    for (size_t i = c * kChunkSize; i < end; ++i) {
      nll[c] += AccumulateSequence(params, batch[i], partial[c], tr, logits);
    }
  });

  LossAndGradient out{0.0, positions, std::move(partial.front())};
  double total_nll = nll[0];
  std::span<double> g = out.gradient.flat();
  for (size_t c = 1; c < chunks; ++c) {
    std::span<const double> pc = partial[c].flat();
    for (size_t i = 0; i < g.size(); ++i) g[i] += pc[i];
    total_nll += nll[c];
  }
  const double scale = 1.0 / static_cast<double>(positions);
  for (double& v : g) v *= scale;
  out.loss = total_nll * scale;
  return out;
}

absl::StatusOr<AccuracyCounts> NwpAccuracy(const ModelParameters& params,
                                           std::span<const std::vector<TokenId>> sequences) {
  AccuracyCounts counts;
  Trace tr;
  std::vector<double> logits;
  const ModelConfig& cfg = params.config();
  for (const auto& seq : sequences) {
    if (seq.size() < 2) continue;
    if (absl::Status s = CheckIds(seq, cfg.vocab_size); !s.ok()) return s;
    const int steps = static_cast<int>(seq.size()) - 1;
    tr.Resize(steps, cfg.embed_dim, cfg.hidden_dim, cfg.vocab_size, false);
    RunLstm(params, seq, steps, tr, logits, [&](int t, std::span<const double> lg) {
      // max_element returns the first maximum, i.e. the lowest id on ties.
      const TokenId pred = static_cast<TokenId>(std::max_element(lg.begin(), lg.end()) - lg.begin());
      counts.correct += pred == seq[t + 1] ? 1 : 0;
      ++counts.total;
    });
  }
  return counts;
}

absl::StatusOr<double> AvgLogLikelihood(const ModelParameters& params,
                                        std::span<const TokenId> ids) {
  if (ids.size() < 2) {
    return absl::InvalidArgumentError("log-likelihood needs at least 2 tokens");
  }
  const ModelConfig& cfg = params.config();
  if (absl::Status s = CheckIds(ids, cfg.vocab_size); !s.ok()) return s;
  const int steps = static_cast<int>(ids.size()) - 1;
  Trace tr;
  tr.Resize(steps, cfg.embed_dim, cfg.hidden_dim, cfg.vocab_size, false);
  std::vector<double> logits;
  double total = 0.0;
  RunLstm(params, ids, steps, tr, logits, [&](int t, std::span<const double> lg) {
    total += std::min(0.0, lg[ids[t + 1]] - LogSumExp(lg));
  });
  return total / steps;
}

AdamState AdamState::For(const ModelParameters& params) {
  return AdamState{std::vector<double>(params.size(), 0.0),
                   std::vector<double>(params.size(), 0.0), 0};
}

absl::Status AdamStep(ModelParameters& params, const ModelParameters& gradient,
                      AdamState& state, const AdamOptions& options) {
  std::span<const double> g = gradient.flat();
  std::span<double> w = params.flat();
  if (g.size() != w.size() || state.first_moment.size() != w.size() ||
      state.second_moment.size() != w.size()) {
    return absl::InvalidArgumentError("Adam state/gradient shape mismatch");
  }
  if (!gradient.AllFinite()) return absl::InvalidArgumentError("non-finite gradient");
  ++state.step;
  const double b1 = options.beta1, b2 = options.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (size_t i = 0; i < w.size(); ++i) {
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = b1 * m + (1.0 - b1) * g[i];
    v = b2 * v + (1.0 - b2) * g[i] * g[i];
    w[i] -= options.learning_rate * (m / c1) / (std::sqrt(v / c2) + options.epsilon);
  }
  return absl::OkStatus();
}

std::vector<std::vector<TokenId>> ToTrainingSequences(std::span<const TokenId> ids,
                                                      int max_len) {
  std::vector<std::vector<TokenId>> out;
  if (ids.size() < 2 || max_len < 2) return out;
  const size_t stride = static_cast<size_t>(max_len) - 1;
  for (size_t start = 0; start + 1 < ids.size(); start += stride) {
    const size_t end = std::min(ids.size(), start + static_cast<size_t>(max_len));
    out.emplace_back(ids.begin() + static_cast<ptrdiff_t>(start),
                     ids.begin() + static_cast<ptrdiff_t>(end));
  }
  return out;
}

std::vector<std::vector<TokenId>> EncodeCorpus(std::span<const Example> corpus,
                                               const Vocabulary& vocab, int max_len) {
  std::vector<std::vector<TokenId>> out;
  for (const Example& ex : corpus) {
    for (auto& seq : ToTrainingSequences(Tokenize(ex.text(), vocab).ids, max_len)) {
      out.push_back(std::move(seq));
    }
  }
  return out;
}

absl::Status SaveCheckpoint(const std::string& path, const ModelParameters& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) return absl::UnavailableError("cannot write " + path);
  const std::string bytes = SerializeParameters(params);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  return out ? absl::OkStatus() : absl::DataLossError("write failed: " + path);
}

absl::StatusOr<ModelParameters> LoadCheckpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return absl::NotFoundError("cannot open checkpoint " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto* u = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0) {
    return absl::DataLossError("not a checkpoint: " + path);
  }
  const size_t hlen = GetLE(u + 8, 4);
  if (bytes.size() < 12 + hlen + 8) return absl::DataLossError("truncated checkpoint header");
  nlohmann::json header =
      nlohmann::json::parse(bytes.substr(12, hlen), nullptr, /*allow_exceptions=*/false);
  if (header.is_discarded() || header.value("format_version", 0) != kCheckpointVersion) {
    return absl::DataLossError("unsupported checkpoint header");
  }
  ModelConfig cfg;
  cfg.vocab_size = header.value("vocab_size", 0);
  cfg.embed_dim = header.value("embed_dim", 0);
  cfg.hidden_dim = header.value("hidden_dim", 0);
  cfg.max_seq_len = header.value("max_seq_len", 0);
  if (absl::Status s = cfg.Validate(); !s.ok()) return s;
  const size_t count = GetLE(u + 12 + hlen, 8);
  const size_t data_off = 12 + hlen + 8;
  if (count != cfg.ParameterCount() || bytes.size() != data_off + 8 * count) {
    return absl::DataLossError("checkpoint parameter count mismatch");
  }
  std::vector<double> values(count);
  for (size_t i = 0; i < count; ++i) {
    values[i] = std::bit_cast<double>(GetLE(u + data_off + 8 * i, 8));
  }
  return ModelParameters::FromFlat(cfg, std::move(values));
}

std::string CheckpointId(const ModelParameters& params) {
  return Sha256Hex(SerializeParameters(params)).substr(0, 16);
}

}  // namespace fedsynth
