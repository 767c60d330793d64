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

#include "riskgate/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <limits>
#include <stdexcept>

#include "riskgate/errors.hpp"

namespace riskgate {

namespace {

void SplitScores(std::span<const TrialRecord> trials, std::vector<double>* mated,
                 std::vector<double>* nonmated) {
  for (const TrialRecord& t : trials) {
    (t.mated ? mated : nonmated)->push_back(t.score);
  }
}

void RequireBothClasses(std::size_t mated, std::size_t nonmated) {
  if (mated == 0) throw ProtocolError("no mated trials");
  if (nonmated == 0) throw ProtocolError("no non-mated trials");
}

ErrorRates MakeRates(double threshold, std::size_t mated, std::size_t nonmated,
                     std::size_t fm, std::size_t fnm) {
  ErrorRates r;
  r.threshold = threshold;
  r.mated = mated;
  r.nonmated = nonmated;
  r.false_matches = fm;
  r.false_non_matches = fnm;
  r.fmr = static_cast<double>(fm) / static_cast<double>(nonmated);
  r.fnmr = static_cast<double>(fnm) / static_cast<double>(mated);
  return r;
}

}  // namespace

ErrorRates ComputeErrorRates(std::span<const TrialRecord> trials, double threshold) {
  std::size_t mated = 0, nonmated = 0, fm = 0, fnm = 0;
  for (const TrialRecord& t : trials) {
    const bool accept = t.score >= threshold;
    if (t.mated) {
      ++mated;
      if (!accept) ++fnm;
    } else {
      ++nonmated;
      if (accept) ++fm;
    }
  }
  RequireBothClasses(mated, nonmated);
  return MakeRates(threshold, mated, nonmated, fm, fnm);
}

Sweep ThresholdSweep(std::span<const TrialRecord> trials) {
  std::vector<double> mated, nonmated;
  SplitScores(trials, &mated, &nonmated);
  RequireBothClasses(mated.size(), nonmated.size());
  std::sort(mated.begin(), mated.end());
  std::sort(nonmated.begin(), nonmated.end());

  std::vector<double> thresholds;
  thresholds.reserve(mated.size() + nonmated.size());
  std::merge(mated.begin(), mated.end(), nonmated.begin(), nonmated.end(),
             std::back_inserter(thresholds));
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                   thresholds.end());

  const std::size_t m = mated.size(), n = nonmated.size();
  Sweep sweep;
  sweep.mated = m;
  sweep.nonmated = n;
  sweep.points.reserve(thresholds.size() + 2);
  const double inf = std::numeric_limits<double>::infinity();
  sweep.points.push_back(
      MakeRates(std::nextafter(thresholds.front(), -inf), m, n, n, 0));
  // Walk both sorted lists; at threshold tau the mated scores below tau are
  // false non-matches and the non-mated scores at or above tau are false
  // matches.
  std::size_t mated_below = 0, nonmated_below = 0;
  for (double tau : thresholds) {
    while (mated_below < m && mated[mated_below] < tau) ++mated_below;
    while (nonmated_below < n && nonmated[nonmated_below] < tau) ++nonmated_below;
    sweep.points.push_back(MakeRates(tau, m, n, n - nonmated_below, mated_below));
  }
  sweep.points.push_back(
      MakeRates(std::nextafter(thresholds.back(), inf), m, n, 0, m));
  return sweep;
}

EerResult ComputeEer(const Sweep& sweep) {
  const auto& pts = sweep.points;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double diff = pts[i].fnmr - pts[i].fmr;
    if (diff < 0.0) continue;
    if (diff == 0.0 || i == 0) return {pts[i].fmr, pts[i].threshold};
    const ErrorRates& lo = pts[i - 1];
    const ErrorRates& hi = pts[i];
    const double d0 = lo.fnmr - lo.fmr;  // < 0
    const double t = -d0 / (diff - d0);
    return {lo.fmr + t * (hi.fmr - lo.fmr),
            lo.threshold + t * (hi.threshold - lo.threshold)};
  }
  // Unreachable: the reject-all endpoint has FNMR = 1 > FMR = 0.
  return {pts.back().fmr, pts.back().threshold};
}

EerResult ComputeEer(std::span<const TrialRecord> trials) {
  return ComputeEer(ThresholdSweep(trials));
}

double DcfParams::DefaultCost() const {
  return std::min(c_fnmr * p_target, c_fmr * (1.0 - p_target));
}

double DetectionCost(const ErrorRates& point, const DcfParams& params) {
  return params.c_fnmr * params.p_target * point.fnmr +
         params.c_fmr * (1.0 - params.p_target) * point.fmr;
}

MinDcfResult ComputeMinDcf(const Sweep& sweep, const DcfParams& params) {
  if (!(params.p_target > 0.0 && params.p_target < 1.0)) {
    throw std::invalid_argument("p_target must lie in (0,1)");
  }
  MinDcfResult best;
  best.unnormalized = std::numeric_limits<double>::infinity();
  for (const ErrorRates& p : sweep.points) {
    const double dcf = DetectionCost(p, params);
    if (dcf < best.unnormalized) {
      best.unnormalized = dcf;
      best.threshold = p.threshold;
    }
  }
  best.normalized = best.unnormalized / params.DefaultCost();
  return best;
}

MinDcfResult ComputeMinDcf(std::span<const TrialRecord> trials,
                           const DcfParams& params) {
  return ComputeMinDcf(ThresholdSweep(trials), params);
}

FmrThreshold ThresholdAtFmr(const Sweep& sweep, double target) {
  if (!(target >= 0.0 && target <= 1.0)) {
    throw std::invalid_argument("FMR target must lie in [0,1]");
  }
  // FMR is non-increasing along the sweep; the reject-all endpoint always
  // qualifies.
  const double allowed = target * static_cast<double>(sweep.nonmated);
  for (const ErrorRates& p : sweep.points) {
    if (static_cast<double>(p.false_matches) <= allowed * (1.0 + 1e-12)) {
      return {p.threshold, p, sweep.nonmated < 100};
    }
  }
  const ErrorRates& last = sweep.points.back();
  return {last.threshold, last, sweep.nonmated < 100};
}

FmrThreshold ThresholdAtFmr(std::span<const TrialRecord> trials, double target) {
  return ThresholdAtFmr(ThresholdSweep(trials), target);
}

double Gini(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n < 2) throw std::invalid_argument("gini: need at least two values");
  double sum = 0.0;
  for (double v : values) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument("gini: values must be finite and nonnegative");
    }
    sum += v;
  }
  if (sum == 0.0) return 0.0;
  double pairwise = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) pairwise += std::abs(values[i] - values[j]);
  }
  const double dn = static_cast<double>(n);
  const double mean = sum / dn;
  return (dn / (dn - 1.0)) * pairwise / (2.0 * dn * dn * mean);
}

const char* PolicyName(AssignmentPolicy policy) {
  switch (policy) {
    case AssignmentPolicy::kBothSides:
      return "both_sides";
    case AssignmentPolicy::kEnrollSide:
      return "enroll_side";
    case AssignmentPolicy::kTestSide:
      return "test_side";
  }
  return "unknown";
}

std::optional<AssignmentPolicy> ParsePolicy(const std::string& name) {
  for (auto p : {AssignmentPolicy::kBothSides, AssignmentPolicy::kEnrollSide,
                 AssignmentPolicy::kTestSide}) {
    if (name == PolicyName(p)) return p;
  }
  return std::nullopt;
}

bool SubgroupRates::complete() const {
  return std::all_of(rates.begin(), rates.end(),
                     [](const auto& r) { return r.has_value(); });
}

const ErrorRates& SubgroupRates::at(Group g) const {
  const auto& r = rates[GroupIndex(g)];
  if (!r) {
    throw ProtocolError(std::string("no subgroup rates for group ") + GroupName(g) +
                        ": " + missing_reason[GroupIndex(g)]);
  }
  return *r;
}

SubgroupRates ComputeSubgroupRates(std::span<const TrialRecord> trials,
                                   double threshold, AssignmentPolicy policy) {
  std::array<std::vector<TrialRecord>, kNumGroups> members;
  for (const TrialRecord& t : trials) {
    std::optional<Group> g;
    switch (policy) {
      case AssignmentPolicy::kBothSides:
        if (t.group_enroll == t.group_test) g = t.group_enroll;
        break;
      case AssignmentPolicy::kEnrollSide:
        g = t.group_enroll;
        break;
      case AssignmentPolicy::kTestSide:
        g = t.group_test;
        break;
    }
    if (g) members[GroupIndex(*g)].push_back(t);
  }
  SubgroupRates out;
  out.threshold = threshold;
  for (std::size_t g = 0; g < kNumGroups; ++g) {
    try {
      out.rates[g] = ComputeErrorRates(members[g], threshold);
    } catch (const ProtocolError& e) {
      out.missing_reason[g] = members[g].empty() ? "no trials" : e.what();
    }
  }
  return out;
}

GarbeResult Garbe(std::span<const double> fmrs, std::span<const double> fnmrs,
                  double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("garbe: alpha must lie in [0,1]");
  }
  GarbeResult r;
  r.gini_fmr = Gini(fmrs);
  r.gini_fnmr = Gini(fnmrs);
  r.garbe = alpha * r.gini_fmr + (1.0 - alpha) * r.gini_fnmr;
  return r;
}

GarbeResult Garbe(const SubgroupRates& subgroup, double alpha) {
  std::vector<double> fmrs, fnmrs;
  for (Group g : {Group::kM, Group::kF}) {
    const ErrorRates& r = subgroup.at(g);
    fmrs.push_back(r.fmr);
    fnmrs.push_back(r.fnmr);
  }
  return Garbe(fmrs, fnmrs, alpha);
}

FairnessReport ComputeFairnessReport(std::span<const TrialRecord> trials,
                                     const FairnessConfig& config) {
  const Sweep sweep = ThresholdSweep(trials);
  FairnessReport report;
  report.config = config;
  report.num_trials = trials.size();
  report.num_mated = sweep.mated;
  report.num_nonmated = sweep.nonmated;
  report.eer = ComputeEer(sweep);
  report.min_dcf = ComputeMinDcf(sweep, config.dcf);
  report.operating_point = ThresholdAtFmr(sweep, config.fmr_target);
  report.subgroup =
      ComputeSubgroupRates(trials, report.operating_point.threshold, config.policy);
  if (report.subgroup.complete()) report.garbe = Garbe(report.subgroup, config.alpha);
  return report;
}

}  // namespace riskgate
