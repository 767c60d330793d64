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

#include "riskgate/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <stdexcept>

#include "CLI11.hpp"
#include "riskgate/errors.hpp"
#include "riskgate/gradcheck.hpp"
#include "riskgate/metrics.hpp"
#include "riskgate/model.hpp"
#include "riskgate/score_io.hpp"
#include "riskgate/synthdata.hpp"
#include "riskgate/trainer.hpp"

namespace riskgate {

namespace {

std::string OneLine(std::string message) {
  std::replace(message.begin(), message.end(), '\n', ' ');
  return message;
}

std::ofstream OpenOutput(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path);
  return out;
}

FairnessConfig MakeFairnessConfig(double alpha, double fmr_target,
                                  const std::string& policy) {
  FairnessConfig config;
  config.alpha = alpha;
  config.fmr_target = fmr_target;
  const auto parsed = ParsePolicy(policy);
  if (!parsed) throw InputError("unknown assignment policy '" + policy + "'");
  config.policy = *parsed;
  return config;
}

struct EvalArgs {
  std::string scores;
  std::string report;
  std::string policy = "both_sides";
  double alpha = 0.5;
  double fmr_target = 0.01;
  bool unnormalized_dcf = false;
};

int CmdEval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  const std::vector<TrialRecord> trials = ReadScoreFile(a.scores);
  const FairnessReport report =
      ComputeFairnessReport(trials, MakeFairnessConfig(a.alpha, a.fmr_target, a.policy));
  if (report.operating_point.few_nonmated) {
    err << "warning: fewer than " << static_cast<long>(1.0 / a.fmr_target)
        << " non-mated trials; the threshold at the FMR target is coarse\n";
  }
  if (!report.garbe) {
    err << "warning: GARBE undefined: " << report.subgroup.missing_reason[0]
        << report.subgroup.missing_reason[1] << '\n';
  }
  if (!a.report.empty()) {
    std::ofstream file = OpenOutput(a.report);
    file << ReportToJson(report, a.unnormalized_dcf).dump(2) << '\n';
  }
  out << SummaryLine(report, a.unnormalized_dcf) << '\n';
  return kExitOk;
}

struct SweepArgs {
  std::string scores;
  std::string out;
};

int CmdSweep(const SweepArgs& a, std::ostream& out) {
  const std::vector<TrialRecord> trials = ReadScoreFile(a.scores);
  const Sweep sweep = ThresholdSweep(trials);
  if (a.out.empty() || a.out == "-") {
    WriteSweepCsv(out, sweep, DcfParams{});
  } else {
    std::ofstream file = OpenOutput(a.out);
    WriteSweepCsv(file, sweep, DcfParams{});
  }
  return kExitOk;
}

struct TrainArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool verbose = false;
};

int CmdTrainToy(const TrainArgs& a, std::ostream& out) {
  TrainConfig config = a.config.empty() ? TrainConfig{} : ReadTrainConfig(a.config);
  if (a.seed) config.seed = *a.seed;
  TrainOptions options;
  options.out_dir = std::filesystem::path(a.out);
  if (a.verbose) options.log_stream = &out;
  std::filesystem::create_directories(a.out);
  {
    std::ofstream resolved = OpenOutput((options.out_dir.value() / "config.conf").string());
    WriteTrainConfig(resolved, config);
  }
  const TrainResult result = Train(config, options);
  out << SummaryLine(result.final_eval.report) << '\n';
  return kExitOk;
}

struct GradcheckArgs {
  std::uint64_t seed = 0;
  double tol = 1e-4;
  std::string inject_fault;
};

int CmdGradcheck(const GradcheckArgs& a, std::ostream& out) {
  std::optional<ad::ScopedGradientFault> fault;
  if (!a.inject_fault.empty()) fault.emplace(a.inject_fault);
  const std::vector<GradReport> reports = GradcheckAll(a.seed, a.tol);
  bool all_pass = true;
  char line[128];
  std::snprintf(line, sizeof(line), "%-20s %14s  %s\n", "op", "max_rel_err", "status");
  out << line;
  for (const GradReport& r : reports) {
    std::snprintf(line, sizeof(line), "%-20s %14.3e  %s\n", r.op.c_str(), r.max_rel_err,
                  r.pass ? "PASS" : "FAIL");
    out << line;
    all_pass = all_pass && r.pass;
  }
  out << (all_pass ? "all " : "FAILED: not all ") << reports.size()
      << " ops within tolerance " << a.tol << '\n';
  return all_pass ? kExitOk : kExitCheckFailed;
}

struct GateDemoArgs {
  std::string checkpoint;
  std::string utterance;
};

int CmdGateDemo(const GateDemoArgs& a, std::ostream& out) {
  const Model model = LoadCheckpoint(a.checkpoint);
  const Tensor features = ReadFeatureFile(a.utterance);
  if (features.dim(0) != model.config().feature_bins) {
    throw InputError("utterance has " + std::to_string(features.dim(0)) +
                     " feature bins, checkpoint expects " +
                     std::to_string(model.config().feature_bins));
  }
  const Tensor mask =
      GateMaskFor(model, features.Reshaped({1, features.dim(0), features.dim(1)}));
  const std::size_t channels = mask.dim(1), frames = mask.dim(2);
  std::vector<std::vector<double>> rows(channels, std::vector<double>(frames));
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t t = 0; t < frames; ++t) rows[c][t] = mask.at(0, c, t);
  }
  const MaskSummary summary = SummarizeMask(rows);
  out << "# channels=" << channels << " frames=" << frames << '\n';
  out << "# mean_mask=" << FormatDouble(summary.mean) << '\n';
  out << "# near_binary_fraction=" << FormatDouble(summary.near_binary_fraction) << '\n';
  out << "# channel_mean=";
  for (std::size_t c = 0; c < channels; ++c) {
    out << (c ? "," : "") << FormatDouble(summary.channel_mean[c]);
  }
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t t = 0; t < frames; ++t) {
      out << (t ? " " : "") << FormatDouble(row[t]);
    }
    out << '\n';
  }
  return kExitOk;
}

struct CorpusArgs {
  std::string config;
  std::string out;
};

int CmdMakeCorpus(const CorpusArgs& a, std::ostream& out) {
  const TrainConfig config =
      a.config.empty() ? TrainConfig{} : ReadTrainConfig(a.config);
  const Corpus corpus = GenerateCorpus(config.corpus);
  ExportCorpus(corpus, a.out);
  char line[160];
  std::snprintf(line, sizeof(line),
                "train=%zu eval=%zu trials=%zu shortcut_probe_accuracy=%.4f\n",
                corpus.train.size(), corpus.eval.size(), corpus.trials.size(),
                ShortcutSeverity(corpus));
  out << line;
  return kExitOk;
}

int ExitCodeFor(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::kInput:
      return kExitInput;
    case ErrorCategory::kProtocol:
      return kExitProtocol;
    case ErrorCategory::kNumerical:
      return kExitNumerical;
  }
  return kExitCheckFailed;
}

}  // namespace

MaskSummary SummarizeMask(const std::vector<std::vector<double>>& mask) {
  MaskSummary s;
  std::size_t count = 0, near_binary = 0;
  double total = 0.0;
  for (const auto& row : mask) {
    double row_total = 0.0;
    for (double v : row) {
      row_total += v;
      if (v * (1.0 - v) < 0.05) ++near_binary;
    }
    s.channel_mean.push_back(row.empty() ? 0.0 : row_total / double(row.size()));
    total += row_total;
    count += row.size();
  }
  if (count > 0) {
    s.mean = total / double(count);
    s.near_binary_fraction = double(near_binary) / double(count);
  }
  return s;
}

int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"riskgate: fairness-aware speaker verification toolkit"};
  app.require_subcommand(1);

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Score-file evaluation and fairness report");
  eval_cmd->add_option("--scores", eval.scores, "Score CSV")->required();
  eval_cmd->add_option("--alpha", eval.alpha, "GARBE weight on the FMR Gini")
      ->capture_default_str();
  eval_cmd->add_option("--fmr-target", eval.fmr_target, "Operating FMR")
      ->capture_default_str();
  eval_cmd->add_option("--report", eval.report, "JSON report output path");
  eval_cmd->add_option("--policy", eval.policy,
                       "Subgroup assignment: both_sides, enroll_side, test_side")
      ->capture_default_str();
  eval_cmd->add_flag("--unnormalized-dcf", eval.unnormalized_dcf,
                     "Print the unnormalized detection cost");

  SweepArgs sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "Export the full threshold sweep");
  sweep_cmd->add_option("--scores", sweep.scores, "Score CSV")->required();
  sweep_cmd->add_option("--out", sweep.out, "CSV output path, '-' for stdout");

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train-toy", "Train on the synthetic corpus");
  train_cmd->add_option("--config", train.config, "key = value config file");
  train_cmd->add_option("--seed", train.seed, "Overrides the config seed");
  train_cmd->add_option("--out", train.out, "Output directory")->required();
  train_cmd->add_flag("--verbose", train.verbose, "Echo the run log to stdout");

  GradcheckArgs grad;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient suite");
  grad_cmd->add_option("--seed", grad.seed)->capture_default_str();
  grad_cmd->add_option("--tol", grad.tol)->capture_default_str();
  grad_cmd->add_option("--inject-fault", grad.inject_fault)->group("");

  GateDemoArgs gate;
  auto* gate_cmd = app.add_subcommand("gate-demo", "Print the routing mask of one utterance");
  gate_cmd->add_option("--checkpoint", gate.checkpoint)->required();
  gate_cmd->add_option("--utterance", gate.utterance, "Feature file")->required();

  CorpusArgs corpus;
  auto* corpus_cmd = app.add_subcommand("make-corpus", "Export the synthetic corpus");
  corpus_cmd->add_option("--config", corpus.config, "key = value config file");
  corpus_cmd->add_option("--out", corpus.out, "Output directory")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: input: " << OneLine(e.what()) << '\n';
    return kExitInput;
  }

  try {
    if (*eval_cmd) return CmdEval(eval, out, err);
    if (*sweep_cmd) return CmdSweep(sweep, out);
    if (*train_cmd) return CmdTrainToy(train, out);
    if (*grad_cmd) return CmdGradcheck(grad, out);
    if (*gate_cmd) return CmdGateDemo(gate, out);
    if (*corpus_cmd) return CmdMakeCorpus(corpus, out);
  } catch (const Error& e) {
    err << "error: " << CategoryName(e.category()) << ": " << OneLine(e.what()) << '\n';
    return ExitCodeFor(e.category());
  } catch (const std::invalid_argument& e) {
    err << "error: input: " << OneLine(e.what()) << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    err << "error: internal: " << OneLine(e.what()) << '\n';
    return kExitCheckFailed;
  }
  return kExitCheckFailed;
}

}  // namespace riskgate
