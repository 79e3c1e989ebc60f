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
// Subcommand runner. Every run is a function of (config, inputs) to files in
// an output directory plus a manifest recording the config hash and the
// SHA-256 of every input and output, so any run can be replayed and checked.

#ifndef FEDSYNTH_EXPERIMENT_H_
#define FEDSYNTH_EXPERIMENT_H_

#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "fedsynth/experiment_config.h"
#include "fedsynth/fl_dp.h"
#include "json.hpp"

namespace fedsynth {

inline constexpr char kToolVersion[] = "0.1.0";

// Named input artifacts; a name may carry several paths (e.g. corpora).
using Inputs = std::map<std::string, std::vector<std::string>>;

struct RunRequest {
  std::string subcommand;
  ExperimentConfig config;
  Inputs inputs;
  std::string out_dir;
  int workers = 1;  // never affects outputs
};

const std::vector<std::string>& SubcommandNames();

// Runs the subcommand and writes <out_dir>/manifest.json. Progress goes to
// `log`; nothing time-dependent reaches the output files.
absl::Status RunSubcommand(const RunRequest& request, std::ostream& log);

struct ReplayReport {
  std::map<std::string, bool> identical;  // output file -> matches manifest
  bool AllIdentical() const;
};

// Re-runs the manifest's subcommand into `out_dir` (inputs must still hash
// to the recorded values) and compares every output byte-for-byte by hash.
absl::StatusOr<ReplayReport> Replay(const std::string& manifest_path,
                                    const std::string& out_dir, int workers,
                                    std::ostream& log);

// Simulated private users: chat-style mock with its own seed and jitter.
Corpus SynthesizePrivate(const ExperimentConfig& cfg, int workers);

struct PrivateSplit {
  Corpus train;
  Corpus holdout;
};
// Whole conversations go to one side; holdout gets round(fraction * convs).
PrivateSplit SplitHoldout(std::span<const Example> corpus, double fraction, uint64_t seed);

struct Populations {
  std::vector<ClientDataset> train;
  std::vector<ClientDataset> holdout;
};
// Preprocesses to turns/sentences, splits off the holdout and partitions
// both sides into clients.
absl::StatusOr<Populations> BuildPopulations(std::span<const Example> private_corpus,
                                             const Vocabulary& vocab,
                                             const ExperimentConfig& cfg);

absl::StatusOr<Corpus> ReadCorpora(const std::vector<std::string>& paths);

}  // namespace fedsynth

#endif  // FEDSYNTH_EXPERIMENT_H_
