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

// Score-level verification and fairness metrics: FMR/FNMR at a threshold,
// EER, minDCF, the threshold achieving a target FMR, Gini coefficients and
// GARBE over per-group error rates at a shared threshold.
//
// Decision rule everywhere: a trial is accepted iff score >= threshold.

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "riskgate/group.hpp"

namespace riskgate {

struct TrialRecord {
  std::string enroll_id;
  std::string test_id;
  double score = 0.0;
  bool mated = false;
  Group group_enroll = Group::kM;
  Group group_test = Group::kM;
};

struct ErrorRates {
  double threshold = 0.0;
  double fmr = 0.0;
  double fnmr = 0.0;
  std::size_t mated = 0;
  std::size_t nonmated = 0;
  std::size_t false_matches = 0;
  std::size_t false_non_matches = 0;
};

// Throws ProtocolError if either class is empty.
ErrorRates ComputeErrorRates(std::span<const TrialRecord> trials, double threshold);

// Every distinct operating point, thresholds ascending: one point just below
// the lowest score (accept all), one at each distinct score, and one just
// above the highest score (reject all).
struct Sweep {
  std::size_t mated = 0;
  std::size_t nonmated = 0;
  std::vector<ErrorRates> points;
};

Sweep ThresholdSweep(std::span<const TrialRecord> trials);

struct EerResult {
  double eer = 0.0;
  double threshold = 0.0;
};

// Rate where FMR and FNMR cross. When no sweep point has them equal, both the
// rate and the threshold are linearly interpolated between the bracketing
// operating points.
EerResult ComputeEer(std::span<const TrialRecord> trials);
EerResult ComputeEer(const Sweep& sweep);

struct DcfParams {
  double p_target = 0.01;
  double c_fnmr = 1.0;
  double c_fmr = 1.0;

  // min(c_fnmr * p_target, c_fmr * (1 - p_target)): cost of the better
  // trivial (accept-all / reject-all) system.
  double DefaultCost() const;
};

double DetectionCost(const ErrorRates& point, const DcfParams& params);

struct MinDcfResult {
  double normalized = 0.0;
  double unnormalized = 0.0;
  double threshold = 0.0;
};

MinDcfResult ComputeMinDcf(std::span<const TrialRecord> trials,
                           const DcfParams& params = {});
MinDcfResult ComputeMinDcf(const Sweep& sweep, const DcfParams& params = {});

struct FmrThreshold {
  double threshold = 0.0;
  ErrorRates rates;
  // Fewer than 100 non-mated trials: a 1% operating point is unreliable.
  bool few_nonmated = false;
};

// Smallest sweep threshold whose pooled FMR does not exceed `target`.
FmrThreshold ThresholdAtFmr(std::span<const TrialRecord> trials, double target = 0.01);
FmrThreshold ThresholdAtFmr(const Sweep& sweep, double target = 0.01);

// Sample-corrected Gini coefficient of nonnegative values,
//   G = n/(n-1) * sum_i sum_j |x_i - x_j| / (2 n^2 mean).
// Zero mean yields 0. Requires n >= 2.
double Gini(std::span<const double> values);

enum class AssignmentPolicy {
  kBothSides,   // group g only if enroll and test sides are both g
  kEnrollSide,  // group of the enrollment side
  kTestSide,    // group of the test side
};

const char* PolicyName(AssignmentPolicy policy);
std::optional<AssignmentPolicy> ParsePolicy(const std::string& name);

struct SubgroupRates {
  double threshold = 0.0;
  std::array<std::optional<ErrorRates>, kNumGroups> rates;
  // Why a group's rates are absent, empty when present.
  std::array<std::string, kNumGroups> missing_reason;

  bool complete() const;
  const ErrorRates& at(Group g) const;
};

SubgroupRates ComputeSubgroupRates(std::span<const TrialRecord> trials,
                                   double threshold,
                                   AssignmentPolicy policy = AssignmentPolicy::kBothSides);

struct GarbeResult {
  double gini_fmr = 0.0;
  double gini_fnmr = 0.0;
  double garbe = 0.0;
};

// alpha * G(FMRs) + (1 - alpha) * G(FNMRs).
GarbeResult Garbe(std::span<const double> fmrs, std::span<const double> fnmrs,
                  double alpha = 0.5);
// Throws ProtocolError when a group is missing.
GarbeResult Garbe(const SubgroupRates& subgroup, double alpha = 0.5);

struct FairnessConfig {
  double alpha = 0.5;
  double fmr_target = 0.01;
  DcfParams dcf;
  AssignmentPolicy policy = AssignmentPolicy::kBothSides;
};

struct FairnessReport {
  std::size_t num_trials = 0;
  std::size_t num_mated = 0;
  std::size_t num_nonmated = 0;
  EerResult eer;
  MinDcfResult min_dcf;
  FmrThreshold operating_point;  // tau at the FMR target, pooled rates there
  SubgroupRates subgroup;
  std::optional<GarbeResult> garbe;  // absent when a group is missing
  FairnessConfig config;
};

FairnessReport ComputeFairnessReport(std::span<const TrialRecord> trials,
                                     const FairnessConfig& config = {});

}  // namespace riskgate
