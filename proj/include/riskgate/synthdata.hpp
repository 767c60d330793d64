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

// Deterministic synthetic two-group speaker corpus with a tunable group cue.
//
// Every frame of an utterance is
//   speaker_prototype + (+/- kappa/2) * group_offset + noise_scale * N(0, I)
// where the sign is + for group M and - for group F, the offset is a seeded
// random unit vector shared by the corpus, and prototypes are drawn once per
// speaker from N(0, identity_scale^2 I). kappa = 0 leaves no group cue; large
// kappa makes the group linearly separable from the utterance mean.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "riskgate/group.hpp"
#include "riskgate/metrics.hpp"
#include "riskgate/tensor.hpp"

namespace riskgate {

struct CorpusSpec {
  std::size_t speakers_per_group = 16;
  std::size_t train_utterances_per_speaker = 8;
  std::size_t eval_utterances_per_speaker = 4;
  std::size_t frames = 16;        // T
  std::size_t feature_bins = 16;  // F
  double kappa = 0.0;             // group cue strength
  double identity_scale = 1.0;
  double f_identity_ratio = 1.0;  // identity scale multiplier for group F
  double noise_scale = 1.0;
  std::uint64_t seed = 1;
  std::size_t mated_trials_per_speaker = 10;
  std::size_t same_group_nonmated_per_speaker = 10;
  std::size_t cross_group_nonmated_per_speaker = 5;

  void Validate() const;
};

struct Utterance {
  std::string id;
  Tensor features;  // [F, T]
  std::size_t speaker = 0;
  Group group = Group::kM;
};

struct Corpus {
  CorpusSpec spec;
  std::vector<Utterance> train;
  std::vector<Utterance> eval;       // unseen utterances of the same speakers
  std::vector<TrialRecord> trials;   // over `eval`, scores unset
  std::size_t num_speakers = 0;
};

Corpus GenerateCorpus(const CorpusSpec& spec);

// Held-out accuracy of a nearest-class-mean proxy-group probe on
// utterance-mean features. Speakers are split into two disjoint folds (by
// index parity within each group); the probe is fit on one fold and scored
// on the other, both ways, and the two accuracies are averaged.
double ShortcutSeverity(const Corpus& corpus);

// Stack utterances into a [B, F, T] batch.
Tensor StackFeatures(const std::vector<const Utterance*>& utterances);

// ---------------------------------------------------------------------------
// Export. Feature files: 8-byte magic "RGFEAT01", uint64 F, uint64 T, then
// F*T little-endian doubles row-major. Manifests: tab separated
// "utt_id speaker_id group path" with a header row.
// ---------------------------------------------------------------------------
void WriteFeatureFile(const std::filesystem::path& path, const Tensor& features);
Tensor ReadFeatureFile(const std::filesystem::path& path);
void ExportCorpus(const Corpus& corpus, const std::filesystem::path& dir);

}  // namespace riskgate
