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

// Loss terms of the training objective and their weighted combination.

#include <cstddef>
#include <span>
#include <vector>

#include "riskgate/autodiff.hpp"
#include "riskgate/gate.hpp"
#include "riskgate/group.hpp"

namespace riskgate {

struct LossWeights {
  double lambda_sex = 1.0;
  double lambda_adv = 0.1;
  double lambda_decor = 0.1;
  double lambda_cap = 0.1;
  double lambda_sat = 0.01;
  double lambda_rex = 0.005;
  double gamma = 1.0;   // gradient reversal strength
  double rho_id = 0.5;  // target routing mass of the identity branch
  std::size_t min_per_group = 2;

  // Throws std::invalid_argument on negative weights or rho_id outside (0,1).
  void Validate() const;
};

struct RiskStats {
  std::vector<double> group_risk;         // R_e, indexed by group
  std::vector<std::size_t> group_count;   // samples per group
  double mean_risk = 0.0;                 // R-bar over groups
  double penalty = 0.0;                   // variance of R_e
  bool applicable = false;                // every group met min_per_group
};

struct LossBreakdown {
  double spk = 0.0;
  double sex = 0.0;
  double adv = 0.0;
  double decor = 0.0;
  double cap = 0.0;
  double sat = 0.0;
  double rex = 0.0;
  double total = 0.0;

  // Weighted sum of the seven terms; `total` is stored from this.
  double Combine(const LossWeights& w) const;
};

struct SpeakerLoss {
  ad::Var loss;        // batch mean
  ad::Var per_sample;  // [B] cross-entropy per utterance
};

// CE over AAM-softmax logits of the identity embeddings.
SpeakerLoss SpkLoss(const ad::Var& z_id, std::span<const std::size_t> speakers,
                    const ad::Var& class_weights, double scale, double margin);

// CE of the sex head on the sex embeddings against proxy labels.
ad::Var SexLoss(const ad::Var& z_sex, std::span<const Group> labels,
                const ad::Var& head_weight, const ad::Var& head_bias);

// CE of the adversarial head on the unit-normalized GRL_gamma(z_id). The
// head reads the same direction-only view that cosine scoring uses, so the
// reversed gradient cannot grow the embedding norm without bound. Forward
// value equals the plain CE; the gradient reaching z_id is -gamma times the
// plain gradient.
ad::Var AdvLoss(const ad::Var& z_id, std::span<const Group> labels,
                const ad::Var& head_weight, const ad::Var& head_bias,
                double gamma, double eps = 1e-8);

// Batch mean of <z_id/|z_id|, z_sex/|z_sex|>^2.
ad::Var DecorLoss(const ad::Var& z_id, const ad::Var& z_sex, double eps = 1e-8);

struct RexResult {
  ad::Var penalty;  // scalar; a constant 0 when not applicable
  RiskStats stats;
};

// Groups per-sample risks by label, R_e = within-group mean, penalty =
// (1/|E|) sum_e (R_e - R-bar)^2. If any group has fewer than min_per_group
// samples the penalty is a constant zero and stats.applicable is false.
RexResult RexPenalty(const ad::Var& per_sample_risk, std::span<const Group> labels,
                     std::size_t min_per_group, std::size_t num_groups = kNumGroups);

// Plain-number variant used for held-out statistics.
RiskStats ComputeRiskStats(std::span<const double> risks,
                           std::span<const Group> labels,
                           std::size_t min_per_group,
                           std::size_t num_groups = kNumGroups);

struct HeadVars {
  ad::Var speaker_weight;  // [N_spk, D], rows normalized on use
  ad::Var sex_weight;      // [D, 2]
  ad::Var sex_bias;        // [2]
  ad::Var adv_weight;      // [D, 2]
  ad::Var adv_bias;        // [2]
};

struct ObjectiveInputs {
  GateMask mask;
  ad::Var z_id;
  ad::Var z_sex;
  std::span<const std::size_t> speakers;
  std::span<const Group> groups;
  HeadVars heads;
  double aam_scale = 30.0;
  double aam_margin = 0.2;
};

struct TotalLoss {
  ad::Var total;
  LossBreakdown breakdown;
  RiskStats rex;
};

// All terms evaluated on the same forward pass.
TotalLoss ComputeTotalLoss(const ObjectiveInputs& in, const LossWeights& weights);

}  // namespace riskgate
