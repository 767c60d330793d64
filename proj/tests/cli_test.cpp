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

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "riskgate/metrics.hpp"
#include "riskgate/model.hpp"
#include "riskgate/score_io.hpp"
#include "riskgate/synthdata.hpp"

namespace riskgate {
namespace {

namespace fs = std::filesystem;

const fs::path kSample = fs::path(RISKGATE_SOURCE_DIR) / "samples" / "subgroup_reference_scores.csv";

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun Cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = RunCli(args, out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("riskgate_cli_" + std::string(
                ::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path Write(const std::string& name, const std::string& content) {
    std::ofstream(dir_ / name) << content;
    return dir_ / name;
  }

  fs::path dir_;
};

TEST_F(CliTest, SampleScoresReproduceReferenceSummary) {
  const CliRun r = Cli({"eval", "--scores", kSample.string(), "--report",
                     (dir_ / "report.json").string()});
  EXPECT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(r.out, "EER=1.01% minDCF=0.4868 GARBE=0.07\n");
  const auto report = nlohmann::json::parse(std::ifstream(dir_ / "report.json"));
  EXPECT_NEAR(report["subgroups"]["M"]["fnmr"]["percent"].get<double>(), 0.96, 0.005);
  EXPECT_NEAR(report["subgroups"]["F"]["fnmr"]["percent"].get<double>(), 1.07, 0.005);
  EXPECT_NEAR(report["subgroups"]["M"]["fmr"]["percent"].get<double>(), 3.80, 0.005);
  EXPECT_NEAR(report["subgroups"]["F"]["fmr"]["percent"].get<double>(), 4.49, 0.005);
  EXPECT_NEAR(report["garbe"].get<double>(), 0.0687, 0.0005);
}

TEST_F(CliTest, MalformedRowIsInputErrorNamingLine) {
  const fs::path p = Write("scores.csv",
                           "enroll_id,test_id,group_enroll,group_test,label,score\n"
                           "a,b,M,M,mated,0.9\n"
                           "a,c,M,M,nonmated\n");
  const CliRun r = Cli({"eval", "--scores", p.string()});
  EXPECT_EQ(r.code, kExitInput);
  EXPECT_NE(r.err.find("scores.csv:3: expected 6 columns, got 5"), std::string::npos)
      << r.err;
  EXPECT_EQ(r.err.rfind("error: input: ", 0), 0u);
}

TEST_F(CliTest, MissingClassIsProtocolError) {
  const fs::path p = Write("scores.csv",
                           "enroll_id,test_id,group_enroll,group_test,label,score\n"
                           "a,b,M,M,mated,0.9\n"
                           "a,c,F,F,mated,0.3\n");
  const CliRun r = Cli({"eval", "--scores", p.string()});
  EXPECT_EQ(r.code, kExitProtocol);
  EXPECT_NE(r.err.find("no non-mated trials"), std::string::npos) << r.err;
}

TEST_F(CliTest, MissingGroupReportsUndefinedGarbe) {
  const fs::path p = Write("scores.csv",
                           "enroll_id,test_id,group_enroll,group_test,label,score\n"
                           "a,b,M,M,mated,0.9\n"
                           "a,c,M,M,nonmated,0.3\n");
  const CliRun r = Cli({"eval", "--scores", p.string()});
  EXPECT_EQ(r.code, kExitOk);
  EXPECT_NE(r.out.find("GARBE=n/a"), std::string::npos);
  EXPECT_NE(r.err.find("GARBE undefined"), std::string::npos);
}

TEST_F(CliTest, UsageErrorsExitTwo) {
  EXPECT_EQ(Cli({}).code, kExitInput);
  EXPECT_EQ(Cli({"eval"}).code, kExitInput);
  EXPECT_EQ(Cli({"eval", "--scores", "/nonexistent/x.csv"}).code, kExitInput);
  EXPECT_EQ(Cli({"eval", "--scores", kSample.string(), "--policy", "sideways"}).code,
            kExitInput);
  EXPECT_EQ(Cli({"frobnicate"}).code, kExitInput);
}

TEST_F(CliTest, SweepHasOneRowPerDistinctScorePlusEndpoints) {
  const CliRun r = Cli({"sweep", "--scores", kSample.string(), "--out", "-"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto trials = ReadScoreFile(kSample);
  std::set<double> distinct;
  for (const auto& t : trials) distinct.insert(t.score);
  std::istringstream lines(r.out);
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line, "tau,fmr,fnmr,dcf");
  std::size_t rows = 0;
  double min_dcf = 1e300;
  while (std::getline(lines, line)) {
    ++rows;
    min_dcf = std::min(min_dcf, std::stod(line.substr(line.rfind(',') + 1)));
  }
  EXPECT_EQ(rows, distinct.size() + 2);
  const MinDcfResult dcf = ComputeMinDcf(trials);
  EXPECT_DOUBLE_EQ(min_dcf, dcf.unnormalized);
}

TEST_F(CliTest, GradcheckPassesAndDetectsInjectedFault) {
  const CliRun ok = Cli({"gradcheck", "--seed", "2"});
  EXPECT_EQ(ok.code, kExitOk);
  EXPECT_NE(ok.out.find("all 45 ops within tolerance"), std::string::npos) << ok.out;
  const CliRun bad = Cli({"gradcheck", "--seed", "2", "--inject-fault", "sigmoid"});
  EXPECT_EQ(bad.code, kExitCheckFailed);
  EXPECT_NE(bad.out.find("FAILED"), std::string::npos);
}

TEST_F(CliTest, GateDemoSummaryMatchesMatrix) {
  ModelConfig config;
  config.feature_bins = 5;
  config.channels = 6;
  config.num_speakers = 4;
  SaveCheckpoint(Model::Initialize(config, 3), dir_ / "m.ckpt");
  Tensor features({5, 9});
  for (std::size_t i = 0; i < features.size(); ++i) {
    features.storage()[i] = 0.1 * static_cast<double>(i % 7) - 0.3;
  }
  WriteFeatureFile(dir_ / "u.bin", features);
  const CliRun r = Cli({"gate-demo", "--checkpoint", (dir_ / "m.ckpt").string(),
                     "--utterance", (dir_ / "u.bin").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  std::istringstream lines(r.out);
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line, "# channels=6 frames=9");
  std::getline(lines, line);
  const double reported_mean = std::stod(line.substr(line.find('=') + 1));
  std::getline(lines, line);
  std::getline(lines, line);
  double sum = 0.0;
  std::size_t count = 0, rows = 0;
  while (std::getline(lines, line)) {
    ++rows;
    std::istringstream values(line);
    double v;
    while (values >> v) {
      EXPECT_GT(v, 0.0);
      EXPECT_LT(v, 1.0);
      sum += v;
      ++count;
    }
  }
  EXPECT_EQ(rows, 6u);
  EXPECT_EQ(count, 54u);
  EXPECT_NEAR(sum / count, reported_mean, 1e-12);
  EXPECT_NEAR(reported_mean, 0.5, 0.05);
}

TEST_F(CliTest, MakeCorpusExportsFiles) {
  const fs::path conf = Write("c.conf", "corpus_speakers_per_group = 2\ncorpus_kappa = 5\n");
  const CliRun r = Cli({"make-corpus", "--config", conf.string(), "--out",
                     (dir_ / "corpus").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("shortcut_probe_accuracy"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir_ / "corpus" / "trials.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "corpus" / "train_manifest.tsv"));
}

TEST_F(CliTest, TrainToyWritesArtifactsAndRejectsTypos) {
  const fs::path conf = Write("t.conf",
                              "steps = 12\neval_interval = 6\nchannels = 8\n"
                              "corpus_speakers_per_group = 3\n");
  const CliRun r = Cli({"train-toy", "--config", conf.string(), "--out",
                     (dir_ / "run").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(r.out.rfind("EER=", 0), 0u);
  for (const char* name : {"config.conf", "run_log.jsonl", "final_report.json",
                           "checkpoint_final.ckpt", "checkpoint_step000006.ckpt"}) {
    EXPECT_TRUE(fs::exists(dir_ / "run" / name)) << name;
  }
  const fs::path typo = Write("bad.conf", "lamda_rex = 0.005\n");
  const CliRun bad = Cli({"train-toy", "--config", typo.string(), "--out",
                       (dir_ / "run2").string()});
  EXPECT_EQ(bad.code, kExitInput);
  EXPECT_NE(bad.err.find("bad.conf:1: unknown config key 'lamda_rex'"), std::string::npos)
      << bad.err;
}

TEST(MaskSummaryTest, CountsNearBinaryEntries) {
  const MaskSummary s = SummarizeMask({{0.01, 0.5}, {0.99, 0.5}});
  EXPECT_DOUBLE_EQ(s.mean, 0.5);
  EXPECT_DOUBLE_EQ(s.near_binary_fraction, 0.5);
  ASSERT_EQ(s.channel_mean.size(), 2u);
  EXPECT_DOUBLE_EQ(s.channel_mean[0], 0.255);
}

}  // namespace
}  // namespace riskgate
