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

#include "riskgate/objectives.hpp"

#include <stdexcept>
#include <string>

#include "riskgate/branches.hpp"
#include "riskgate/errors.hpp"

namespace riskgate {

namespace {

std::vector<std::size_t> ClassIndices(std::span<const Group> labels) {
  std::vector<std::size_t> out;
  out.reserve(labels.size());
  for (Group g : labels) out.push_back(GroupIndex(g));
  return out;
}

std::vector<std::vector<std::size_t>> Partition(std::span<const Group> labels,
                                                std::size_t num_groups) {
  std::vector<std::vector<std::size_t>> members(num_groups);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::size_t g = GroupIndex(labels[i]);
    if (g >= num_groups) throw std::invalid_argument("rex: group label out of range");
    members[g].push_back(i);
  }
  return members;
}

}  // namespace

void LossWeights::Validate() const {
  const double all[] = {lambda_sex, lambda_adv, lambda_decor, lambda_cap,
                        lambda_sat, lambda_rex, gamma};
  for (double v : all) {
    if (!(v >= 0.0)) throw std::invalid_argument("loss weights must be nonnegative");
  }
  if (!(rho_id > 0.0 && rho_id < 1.0)) {
    throw std::invalid_argument("rho_id must lie in (0,1)");
  }
}

double LossBreakdown::Combine(const LossWeights& w) const {
  double t = spk;
  t = t + w.lambda_sex * sex;
  t = t + w.lambda_adv * adv;
  t = t + w.lambda_decor * decor;
  t = t + w.lambda_cap * cap;
  t = t + w.lambda_sat * sat;
  t = t + w.lambda_rex * rex;
  return t;
}

SpeakerLoss SpkLoss(const ad::Var& z_id, std::span<const std::size_t> speakers,
                    const ad::Var& class_weights, double scale, double margin) {
  ad::Var logits = AamLogits(z_id, speakers, class_weights, scale, margin);
  ad::Var per_sample = ad::CrossEntropyRows(logits, speakers);
  return SpeakerLoss{ad::Mean(per_sample), per_sample};
}

ad::Var SexLoss(const ad::Var& z_sex, std::span<const Group> labels,
                const ad::Var& head_weight, const ad::Var& head_bias) {
  const auto targets = ClassIndices(labels);
  return ad::CrossEntropy(Linear(z_sex, head_weight, head_bias), targets);
}

ad::Var AdvLoss(const ad::Var& z_id, std::span<const Group> labels,
                const ad::Var& head_weight, const ad::Var& head_bias,
                double gamma, double eps) {
  const auto targets = ClassIndices(labels);
  const ad::Var unit = ad::L2Normalize(Grl(z_id, gamma), eps);
  return ad::CrossEntropy(Linear(unit, head_weight, head_bias), targets);
}

ad::Var DecorLoss(const ad::Var& z_id, const ad::Var& z_sex, double eps) {
  ad::Var cos = ad::Dot(ad::L2Normalize(z_id, eps), ad::L2Normalize(z_sex, eps));
  return ad::Mean(ad::Square(cos));
}

RexResult RexPenalty(const ad::Var& per_sample_risk, std::span<const Group> labels,
                     std::size_t min_per_group, std::size_t num_groups) {
  RequireRank(per_sample_risk.value(), 1, "rex_penalty");
  if (per_sample_risk.value().size() != labels.size()) {
    throw ShapeError("rex_penalty: " + std::to_string(labels.size()) +
                     " labels for " + std::to_string(per_sample_risk.value().size()) +
                     " risks");
  }
  const auto members = Partition(labels, num_groups);
  RexResult result;
  result.stats.group_risk.assign(num_groups, 0.0);
  result.stats.group_count.assign(num_groups, 0);
  result.stats.applicable = true;
  for (std::size_t g = 0; g < num_groups; ++g) {
    result.stats.group_count[g] = members[g].size();
    if (members[g].size() < min_per_group || members[g].empty()) {
      result.stats.applicable = false;
    }
  }

  if (!result.stats.applicable) {
    for (std::size_t g = 0; g < num_groups; ++g) {
      if (members[g].empty()) continue;
      double acc = 0.0;
      for (std::size_t i : members[g]) acc += per_sample_risk.value()[i];
      result.stats.group_risk[g] = acc / static_cast<double>(members[g].size());
    }
    result.penalty = ad::Constant(Tensor::Scalar(0.0));
    return result;
  }

  const double inv_groups = 1.0 / static_cast<double>(num_groups);
  std::vector<ad::Var> risks;
  for (std::size_t g = 0; g < num_groups; ++g) {
    risks.push_back(ad::Mean(ad::Gather(per_sample_risk, members[g])));
    result.stats.group_risk[g] = risks.back().item();
  }
  ad::Var sum = risks[0];
  for (std::size_t g = 1; g < num_groups; ++g) sum = ad::Add(sum, risks[g]);
  ad::Var mean = ad::Scale(sum, inv_groups);
  ad::Var spread = ad::Square(ad::Sub(risks[0], mean));
  for (std::size_t g = 1; g < num_groups; ++g) {
    spread = ad::Add(spread, ad::Square(ad::Sub(risks[g], mean)));
  }
  result.penalty = ad::Scale(spread, inv_groups);
  result.stats.mean_risk = mean.item();
  result.stats.penalty = result.penalty.item();
  return result;
}

RiskStats ComputeRiskStats(std::span<const double> risks,
                           std::span<const Group> labels,
                           std::size_t min_per_group, std::size_t num_groups) {
  ad::Var v = ad::Constant(Tensor({risks.size()}, {risks.begin(), risks.end()}));
  return RexPenalty(v, labels, min_per_group, num_groups).stats;
}

TotalLoss ComputeTotalLoss(const ObjectiveInputs& in, const LossWeights& weights) {
  weights.Validate();
  const SpeakerLoss spk = SpkLoss(in.z_id, in.speakers, in.heads.speaker_weight,
                                  in.aam_scale, in.aam_margin);
  const ad::Var sex = SexLoss(in.z_sex, in.groups, in.heads.sex_weight,
                              in.heads.sex_bias);
  const ad::Var adv = AdvLoss(in.z_id, in.groups, in.heads.adv_weight,
                              in.heads.adv_bias, weights.gamma);
  const ad::Var decor = DecorLoss(in.z_id, in.z_sex);
  const ad::Var cap = CapLoss(in.mask, weights.rho_id);
  const ad::Var sat = SatLoss(in.mask);
  RexResult rex = RexPenalty(spk.per_sample, in.groups, weights.min_per_group);

  // Same association order as LossBreakdown::Combine.
  ad::Var total = spk.loss;
  total = ad::Add(total, ad::Scale(sex, weights.lambda_sex));
  total = ad::Add(total, ad::Scale(adv, weights.lambda_adv));
  total = ad::Add(total, ad::Scale(decor, weights.lambda_decor));
  total = ad::Add(total, ad::Scale(cap, weights.lambda_cap));
  total = ad::Add(total, ad::Scale(sat, weights.lambda_sat));
  total = ad::Add(total, ad::Scale(rex.penalty, weights.lambda_rex));

  TotalLoss out;
  out.total = total;
  out.breakdown = LossBreakdown{spk.loss.item(), sex.item(),   adv.item(),
                                decor.item(),    cap.item(),   sat.item(),
                                rex.penalty.item(), total.item()};
  out.rex = std::move(rex.stats);
  return out;
}

}  // namespace riskgate
