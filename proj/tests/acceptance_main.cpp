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

// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "riskgate/cli.hpp"
#include "riskgate/gate.hpp"
#include "riskgate/gradcheck.hpp"
#include "riskgate/metrics.hpp"
#include "riskgate/model.hpp"
#include "riskgate/objectives.hpp"
#include "riskgate/trainer.hpp"

namespace riskgate {
namespace {

namespace fs = std::filesystem;

const fs::path kSamples = fs::path(RISKGATE_SOURCE_DIR) / "samples";

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string Fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), format, args...);
  return buf;
}

double Median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Tensor Gaussian(Shape shape, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> normal(0.0, scale);
  Tensor t(std::move(shape));
  for (double& v : t.storage()) v = normal(rng);
  return t;
}

// 1. GARBE from reference subgroup rates.
Outcome GarbeRoundTrip() {
  const double full = Garbe(std::vector{0.0380, 0.0449}, std::vector{0.0096, 0.0107}).garbe;
  const double no_cap =
      Garbe(std::vector{0.0476, 0.0630}, std::vector{0.0103, 0.0095}).garbe;
  const bool pass = std::abs(full - 0.0687) <= 0.0005 &&
                    std::abs(no_cap - 0.0898) <= 0.0005 &&
                    Fmt("%.2f", full) == "0.07" && Fmt("%.2f", no_cap) == "0.09";
  return {pass, Fmt("full=%.6f no_cap=%.6f", full, no_cap)};
}

// 2. Finite-difference agreement for every registered op.
Outcome GradientSuite() {
  double worst = 0.0;
  std::string worst_op;
  bool pass = true;
  std::size_t ops = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto reports = GradcheckAll(seed, 1e-4);
    ops = reports.size();
    for (const GradReport& r : reports) {
      pass = pass && r.pass;
      if (r.max_rel_err > worst) {
        worst = r.max_rel_err;
        worst_op = r.op;
      }
    }
  }
  const auto registered = RegisteredOps();
  for (const char* required :
       {"loss_spk", "loss_sex", "loss_adv", "loss_decor", "loss_cap", "loss_sat",
        "loss_rex", "loss_total", "gate_mask", "route", "grad_reverse"}) {
    if (std::find(registered.begin(), registered.end(), required) == registered.end()) {
      return {false, std::string("missing op ") + required};
    }
  }
  return {pass, Fmt("%zu ops x 5 seeds, worst %.3e (%s)", ops, worst, worst_op.c_str())};
}

// 3. identity + sex parts reconstruct the input.
Outcome Complementarity() {
  std::mt19937_64 rng(33);
  std::uniform_int_distribution<std::size_t> dim(1, 6);
  double worst_ulps = 0.0;
  for (int draw = 0; draw < 100; ++draw) {
    const std::size_t b = dim(rng), c = dim(rng), t = dim(rng) + 2, k = 2 * dim(rng) - 1;
    const double scale = std::pow(10.0, std::uniform_real_distribution<double>(-3, 3)(rng));
    const Tensor u = Gaussian({b, c, t}, rng, scale);
    const ad::Var uv = ad::Constant(u);
    const GateMask mask = ComputeMask(uv, ad::Constant(Gaussian({c, k}, rng, 1.0)),
                                      ad::Constant(Gaussian({c}, rng, 1.0)));
    const RoutedFeatures r = Route(uv, mask);
    for (std::size_t i = 0; i < u.size(); ++i) {
      const double err = std::abs((r.identity.value()[i] + r.sex.value()[i]) - u[i]);
      const double ulp = std::nextafter(std::abs(u[i]), INFINITY) - std::abs(u[i]);
      worst_ulps = std::max(worst_ulps, err / ulp);
    }
  }
  return {worst_ulps <= 1.0, Fmt("100 draws, worst %.1f ulp", worst_ulps)};
}

// 4. Closed-form loss values.
Outcome ClosedFormLosses() {
  using ad::Constant;
  auto mask = [](double v) { return GateMask{Constant(Tensor({2, 3, 4}, v))}; };
  const Tensor binary({1, 2, 2}, {0.0, 1.0, 1.0, 0.0});
  const std::vector<Group> labels{Group::kM, Group::kM, Group::kF, Group::kF};
  const Tensor risks({4}, {0.7, 0.9, 1.1, 1.3});
  const Tensor a({2, 2}, {1.0, 0.0, 0.0, 2.0});
  const Tensor orth({2, 2}, {0.0, 3.0, -1.0, 0.0});
  const double values[6] = {
      SatLoss(mask(0.5)).item(),
      SatLoss({Constant(binary)}).item(),
      CapLoss(mask(0.5), 0.5).item(),
      RexPenalty(Constant(risks), labels, 2).penalty.item(),
      DecorLoss(Constant(a), Constant(orth)).item(),
      DecorLoss(Constant(a), Constant(a)).item(),
  };
  const double expected[6] = {0.25, 0.0, 0.0, 0.04, 0.0, 1.0};
  double worst = 0.0;
  for (int i = 0; i < 6; ++i) worst = std::max(worst, std::abs(values[i] - expected[i]));
  return {worst <= 1e-12, Fmt("max deviation %.2e", worst)};
}

std::vector<TrialRecord> RandomScoreSet(std::mt19937_64& rng) {
  const std::size_t n = std::uniform_int_distribution<std::size_t>(2, 10000)(rng);
  const double separation = std::uniform_real_distribution<double>(0.0, 3.0)(rng);
  const bool quantize = rng() % 2 == 0;
  std::normal_distribution<double> normal;
  std::vector<TrialRecord> trials(n);
  for (std::size_t i = 0; i < n; ++i) {
    TrialRecord& t = trials[i];
    t.mated = i == 0 || (i != 1 && rng() % 4 == 0);
    t.score = normal(rng) + (t.mated ? separation : 0.0);
    if (quantize) t.score = std::round(t.score * 20.0) / 20.0;
  }
  return trials;
}

// Rates at tau computed from scratch over the whole set.
std::pair<double, double> BruteRates(const std::vector<TrialRecord>& trials, double tau) {
  double mated = 0, nonmated = 0, fm = 0, fnm = 0;
  for (const TrialRecord& t : trials) {
    if (t.mated) {
      ++mated;
      fnm += t.score < tau;
    } else {
      ++nonmated;
      fm += t.score >= tau;
    }
  }
  return {fm / nonmated, fnm / mated};
}

// 5. Sweep-based EER and minDCF against exhaustive recomputation.
Outcome MetricOracle() {
  std::mt19937_64 rng(55);
  double eer_err = 0.0, dcf_err = 0.0;
  bool monotone = true;
  const DcfParams params;
  for (int set = 0; set < 50; ++set) {
    const auto trials = RandomScoreSet(rng);
    std::set<double> distinct;
    for (const auto& t : trials) distinct.insert(t.score);
    std::vector<double> taus{-INFINITY};
    taus.insert(taus.end(), distinct.begin(), distinct.end());
    taus.push_back(INFINITY);
    std::vector<std::pair<double, double>> rates;
    double best_dcf = INFINITY;
    for (double tau : taus) {
      rates.push_back(BruteRates(trials, tau));
      const auto [fmr, fnmr] = rates.back();
      best_dcf = std::min(best_dcf, params.c_fnmr * params.p_target * fnmr +
                                        params.c_fmr * (1 - params.p_target) * fmr);
      if (rates.size() > 1) {
        const auto& prev = rates[rates.size() - 2];
        monotone = monotone && fmr <= prev.first && fnmr >= prev.second;
      }
    }
    double brute_eer = 0.0;
    for (std::size_t i = 0; i < rates.size(); ++i) {
      const double d = rates[i].second - rates[i].first;
      if (d < 0) continue;
      if (i == 0 || d == 0) {
        brute_eer = rates[i].first;
      } else {
        const double d0 = rates[i - 1].second - rates[i - 1].first;
        const double w = d0 / (d0 - d);
        brute_eer = rates[i - 1].first + w * (rates[i].first - rates[i - 1].first);
      }
      break;
    }
    const Sweep sweep = ThresholdSweep(trials);
    eer_err = std::max(eer_err, std::abs(ComputeEer(sweep).eer - brute_eer));
    dcf_err = std::max(dcf_err, std::abs(ComputeMinDcf(sweep).unnormalized - best_dcf));
    for (std::size_t i = 1; i < sweep.points.size(); ++i) {
      monotone = monotone && sweep.points[i].fmr <= sweep.points[i - 1].fmr &&
                 sweep.points[i].fnmr >= sweep.points[i - 1].fnmr;
    }
  }
  return {eer_err <= 1e-9 && dcf_err <= 1e-12 && monotone,
          Fmt("50 sets, EER err %.2e, minDCF err %.2e, monotone=%d", eer_err, dcf_err,
              int(monotone))};
}

// 6. minDCF range under the NIST costs.
Outcome MinDcfBounds() {
  std::mt19937_64 rng(66);
  bool pass = true;
  for (int set = 0; set < 200; ++set) {
    const MinDcfResult r = ComputeMinDcf(RandomScoreSet(rng));
    pass = pass && r.unnormalized <= 0.01 && r.normalized >= 0.0 && r.normalized <= 1.0;
  }
  std::vector<TrialRecord> flat(40);
  for (std::size_t i = 0; i < flat.size(); ++i) {
    flat[i].mated = i % 3 == 0;
    flat[i].score = 0.42;
  }
  const double degenerate = ComputeMinDcf(flat).normalized;
  return {pass && degenerate == 1.0,
          Fmt("200 random sets in bounds=%d, all-equal normalized=%.17g", int(pass),
              degenerate)};
}

// 7. Paired ablation of the risk-equalization penalty.
Outcome RexMitigation() {
  const TrainConfig base = ReadTrainConfig(kSamples / "rex_ablation.conf");
  std::vector<double> gap[2], garbe[2], eer[2];
  std::string runs;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    for (int on = 0; on < 2; ++on) {
      TrainConfig c = base;
      c.seed = seed;
      c.corpus.seed = seed;
      c.weights.lambda_rex = on ? 0.005 : 0.0;
      const EvalResult ev = Train(c).final_eval;
      gap[on].push_back(std::abs(ev.risks.group_risk[0] - ev.risks.group_risk[1]));
      garbe[on].push_back(ev.report.garbe ? ev.report.garbe->garbe : INFINITY);
      eer[on].push_back(ev.report.eer.eer);
    }
  }
  const double g0 = Median(gap[0]), g1 = Median(gap[1]);
  const double G0 = Median(garbe[0]), G1 = Median(garbe[1]);
  const double e0 = Median(eer[0]), e1 = Median(eer[1]);
  return {g1 < g0 && G1 < G0 && e1 <= 1.1 * e0,
          Fmt("median |R_M-R_F| off %.4f on %.4f, GARBE off %.4f on %.4f, "
              "EER off %.4f on %.4f",
              g0, g1, G0, G1, e0, e1)};
}

// 8. Gradient reversal scales the gradient and leaves values untouched.
Outcome GrlContract() {
  std::mt19937_64 rng(88);
  const Tensor z = Gaussian({5, 4}, rng, 1.0);
  const Tensor w = Gaussian({4, 3}, rng, 1.0);
  const std::vector<std::size_t> targets{0, 2, 1, 1, 0};
  double worst = 0.0;
  bool identical = true;
  for (double gamma : {0.0, 0.5, 1.0}) {
    const ad::Var plain = ad::Param(z);
    const ad::Var plain_loss = ad::CrossEntropy(ad::MatMul(plain, ad::Constant(w)), targets);
    ad::Backward(plain_loss);
    const ad::Var below = ad::Param(z);
    const ad::Var reversed = ad::GradReverse(below, gamma);
    const ad::Var loss = ad::CrossEntropy(ad::MatMul(reversed, ad::Constant(w)), targets);
    ad::Backward(loss);
    identical = identical && reversed.value() == z && loss.item() == plain_loss.item();
    for (std::size_t i = 0; i < z.size(); ++i) {
      worst = std::max(worst, std::abs(below.grad()[i] + gamma * plain.grad()[i]));
    }
  }
  return {worst <= 1e-12 && identical,
          Fmt("max |g + gamma*g_plain| %.2e, forward identical=%d", worst, int(identical))};
}

// 9. Verification scores do not read the sex branch.
Outcome DeploymentIsolation() {
  TrainConfig config = ReadTrainConfig(kSamples / "default_toy.conf");
  config.steps = 30;
  config.eval_interval = 30;
  const Corpus corpus = GenerateCorpus(config.corpus);
  Model model = Train(config, corpus).model;
  const EvalResult before = Evaluate(model, corpus);
  std::mt19937_64 rng(99);
  std::normal_distribution<double> normal;
  std::size_t perturbed = 0;
  for (auto& [name, t] : model.mutable_params()) {
    if (!IsSexBranchParam(name)) continue;
    for (double& v : t.storage()) v += normal(rng);
    ++perturbed;
  }
  const EvalResult after = Evaluate(model, corpus);
  bool same = before.scored_trials.size() == after.scored_trials.size();
  for (std::size_t i = 0; same && i < before.scored_trials.size(); ++i) {
    same = std::bit_cast<std::uint64_t>(before.scored_trials[i].score) ==
           std::bit_cast<std::uint64_t>(after.scored_trials[i].score);
  }
  return {same && perturbed > 0,
          Fmt("%zu sex-branch tensors perturbed, %zu scores bitwise equal=%d", perturbed,
              before.scored_trials.size(), int(same))};
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 10. Repeated CLI runs produce byte-identical artifacts.
Outcome Determinism() {
  const fs::path dir = fs::temp_directory_path() / "riskgate_acceptance_determinism";
  fs::remove_all(dir);
  std::string stdout_text[2];
  for (int i = 0; i < 2; ++i) {
    const fs::path run = dir / std::to_string(i);
    std::ostringstream out, err;
    const int train = RunCli({"train-toy", "--config",
                              (kSamples / "default_toy.conf").string(), "--out",
                              run.string()},
                             out, err);
    const int eval = RunCli({"eval", "--scores",
                             (kSamples / "subgroup_reference_scores.csv").string(),
                             "--report", (run / "eval_report.json").string()},
                            out, err);
    if (train != 0 || eval != 0) return {false, "command failed: " + err.str()};
    stdout_text[i] = out.str();
  }
  std::size_t compared = 0;
  bool same = stdout_text[0] == stdout_text[1];
  for (const auto& entry : fs::directory_iterator(dir / "0")) {
    const fs::path other = dir / "1" / entry.path().filename();
    same = same && fs::exists(other) && Slurp(entry.path()) == Slurp(other);
    ++compared;
  }
  fs::remove_all(dir);
  return {same && compared >= 5, Fmt("%zu files and stdout byte-identical=%d", compared,
                                     int(same))};
}

}  // namespace
}  // namespace riskgate

int main() {
  using namespace riskgate;
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"GARBE reference round trip", GarbeRoundTrip},
      {"gradient suite", GradientSuite},
      {"routing complementarity", Complementarity},
      {"closed-form loss values", ClosedFormLosses},
      {"metric oracle equivalence", MetricOracle},
      {"minDCF bounds", MinDcfBounds},
      {"risk-equalization mitigation", RexMitigation},
      {"gradient reversal contract", GrlContract},
      {"deployment isolation", DeploymentIsolation},
      {"determinism", Determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s %2zu %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", i + 1,
                criteria[i].first, o.detail.c_str(), secs);
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
