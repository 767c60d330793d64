// Copyright 2026 The riskgate Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Deterministic toy training loop: encoder -> gate -> branches -> objective,
// SGD with momentum, periodic held-out evaluation and checkpoints.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "riskgate/errors.hpp"
#include "riskgate/metrics.hpp"
#include "riskgate/model.hpp"
#include "riskgate/objectives.hpp"
#include "riskgate/synthdata.hpp"

namespace riskgate {

struct TrainConfig {
  LossWeights weights;
  ModelConfig model;  // feature_bins and num_speakers come from the corpus
  CorpusSpec corpus;
  double learning_rate = 0.005;
  double momentum = 0.9;
  std::size_t batch_size = 32;
  std::size_t steps = 2000;
  std::size_t eval_interval = 500;
  std::uint64_t seed = 0;

  void Validate() const;
};

// Parses "key = value" lines; '#' starts a comment. Unknown keys and
// malformed values throw InputError naming the key and line.
TrainConfig ParseTrainConfig(std::istream& in, const std::string& source,
                             TrainConfig base = {});
TrainConfig ReadTrainConfig(const std::filesystem::path& path);
// Every key with its current value, in documentation order.
void WriteTrainConfig(std::ostream& out, const TrainConfig& config);
std::vector<std::string> TrainConfigKeys();

// Seeded stream of training batches (indices into the utterance list).
// Each group is shuffled independently and consumed epoch by epoch; a batch
// takes ceil(B/2) from M and the rest from F, so every batch carries at least
// min_per_group utterances of each group whenever B >= 2 * min_per_group and
// both groups exist. With a single group present all slots come from it.
class BatchStream {
 public:
  BatchStream(const std::vector<Utterance>& utterances, std::size_t batch_size,
              std::uint64_t seed);

  std::vector<std::size_t> Next();
  bool single_group() const { return single_group_; }

 private:
  std::size_t Draw(std::size_t group);

  std::size_t batch_size_;
  std::vector<std::size_t> members_[kNumGroups];
  std::vector<std::size_t> order_[kNumGroups];
  std::size_t cursor_[kNumGroups] = {0, 0};
  bool single_group_ = false;
  std::mt19937_64 rng_;
};

struct StepRecord {
  std::size_t step = 0;
  LossBreakdown loss;
  RiskStats rex;
};

struct EvalRecord {
  std::size_t step = 0;
  FairnessReport report;
  RiskStats risks;  // held-out per-group speaker risk
};

struct RunLog {
  std::vector<StepRecord> steps;
  std::vector<EvalRecord> evals;
};

std::string StepRecordJson(const StepRecord& record);
std::string EvalRecordJson(const EvalRecord& record);

struct EvalResult {
  FairnessReport report;
  RiskStats risks;
  std::vector<TrialRecord> scored_trials;
};

// Scores every trial with cosine similarity of identity embeddings (the sex
// branch is not consulted) and computes held-out per-group risks.
EvalResult Evaluate(const Model& model, const Corpus& corpus,
                    const FairnessConfig& fairness = {});

// Training-time divergence; the message names the step.
class DivergenceError : public NumericalError {
 public:
  DivergenceError(std::size_t step, const std::string& detail);
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

struct TrainOptions {
  // When set, checkpoints, the run log and the final report go here.
  std::optional<std::filesystem::path> out_dir;
  // Run log lines are also streamed here when non-null.
  std::ostream* log_stream = nullptr;
};

struct TrainResult {
  Model model;
  RunLog log;
  EvalResult final_eval;
};

TrainResult Train(const TrainConfig& config, const Corpus& corpus,
                  const TrainOptions& options = {});
TrainResult Train(const TrainConfig& config, const TrainOptions& options = {});

}  // namespace riskgate
