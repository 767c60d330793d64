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

#include "riskgate/score_io.hpp"

#include <gtest/gtest.h>

#include <sstream>

#include "riskgate/errors.hpp"

namespace riskgate {
namespace {

constexpr const char* kValid =
    "# comment line\n"
    "enroll_id,test_id,group_enroll,group_test,label,score\n"
    "a,b,M,M,mated,0.75\n"
    "\n"
    "c,d,F,M,nonmated,-0.125\r\n";

std::vector<TrialRecord> Parse(const std::string& text) {
  std::istringstream in(text);
  return ParseScores(in, "scores.csv");
}

std::string ErrorOf(const std::string& text) {
  try {
    Parse(text);
  } catch (const InputError& e) {
    return e.what();
  }
  return "";
}

TEST(ParseScoresTest, ValidFile) {
  const auto trials = Parse(kValid);
  ASSERT_EQ(trials.size(), 2u);
  EXPECT_EQ(trials[0].enroll_id, "a");
  EXPECT_TRUE(trials[0].mated);
  EXPECT_EQ(trials[0].score, 0.75);
  EXPECT_EQ(trials[1].group_enroll, Group::kF);
  EXPECT_EQ(trials[1].group_test, Group::kM);
  EXPECT_FALSE(trials[1].mated);
  EXPECT_EQ(trials[1].score, -0.125);
}

TEST(ParseScoresTest, ErrorsNameTheLine) {
  const std::string header = "enroll_id,test_id,group_enroll,group_test,label,score\n";
  EXPECT_EQ(ErrorOf(header + "a,b,M,M,mated,0.5\na,b,M,mated,0.5\n"),
            "scores.csv:3: expected 6 columns, got 5");
  EXPECT_EQ(ErrorOf(header + "a,b,M,M,impostor,0.5\n"),
            "scores.csv:2: unknown label 'impostor'");
  EXPECT_EQ(ErrorOf(header + "a,b,X,M,mated,0.5\n"), "scores.csv:2: group must be M or F");
  EXPECT_EQ(ErrorOf(header + "a,b,M,M,mated,nan\n"), "scores.csv:2: invalid score 'nan'");
  EXPECT_EQ(ErrorOf(header + "a,b,M,M,mated,0.5x\n"),
            "scores.csv:2: invalid score '0.5x'");
  EXPECT_NE(ErrorOf("a,b,M,M,mated,0.5\n").find("scores.csv:1: expected header"),
            std::string::npos);
  EXPECT_NE(ErrorOf("").find("missing header"), std::string::npos);
}

TEST(ScoreFileTest, WriteParseRoundTrip) {
  const auto trials = Parse(kValid);
  std::ostringstream out;
  WriteScores(out, trials);
  std::istringstream in(out.str());
  const auto again = ParseScores(in, "round-trip");
  ASSERT_EQ(again.size(), trials.size());
  for (std::size_t i = 0; i < trials.size(); ++i) {
    EXPECT_EQ(again[i].score, trials[i].score);
    EXPECT_EQ(again[i].test_id, trials[i].test_id);
  }
}

TEST(TrialListTest, ParsesWithoutScores) {
  std::istringstream in(
      "enroll_id,test_id,group_enroll,group_test,label\nx,y,F,F,nonmated\n");
  const auto trials = ParseTrialList(in, "trials.csv");
  ASSERT_EQ(trials.size(), 1u);
  EXPECT_EQ(trials[0].group_enroll, Group::kF);
}

TEST(FormatDoubleTest, ShortestRoundTrip) {
  EXPECT_EQ(FormatDouble(0.1), "0.1");
  EXPECT_EQ(FormatDouble(-2.0), "-2");
  const double v = 0.1 + 0.2;
  EXPECT_EQ(std::stod(FormatDouble(v)), v);
}

TEST(ReportJsonTest, CarriesFractionsPercentsAndSchema) {
  const auto trials = Parse(kValid);
  std::vector<TrialRecord> many;
  for (int i = 0; i < 4; ++i) {
    for (const auto& t : trials) many.push_back(t);
  }
  const FairnessReport report = ComputeFairnessReport(many);
  const auto j = ReportToJson(report);
  EXPECT_EQ(j["schema"], "riskgate.fairness_report");
  EXPECT_EQ(j["schema_version"], kReportSchemaVersion);
  EXPECT_EQ(j["eer"]["percent"].get<double>(), 100.0 * j["eer"]["fraction"].get<double>());
  EXPECT_TRUE(j["garbe"].is_null());
  EXPECT_TRUE(j["subgroups"]["F"].contains("missing"));
  EXPECT_EQ(j["min_dcf"]["primary"], "normalized");
  EXPECT_EQ(ReportToJson(report, true)["min_dcf"]["primary"], "unnormalized");
}

TEST(SummaryLineTest, PercentFormatting) {
  FairnessReport r;
  r.eer.eer = 0.0225;
  r.min_dcf.normalized = 0.26;
  r.min_dcf.unnormalized = 0.0026;
  r.garbe = GarbeResult{0.1, 0.04, 0.07};
  EXPECT_EQ(SummaryLine(r), "EER=2.25% minDCF=0.2600 GARBE=0.07");
  EXPECT_EQ(SummaryLine(r, true), "EER=2.25% minDCF=0.0026 GARBE=0.07");
  r.garbe.reset();
  EXPECT_EQ(SummaryLine(r), "EER=2.25% minDCF=0.2600 GARBE=n/a");
}

TEST(SweepCsvTest, HeaderAndRows) {
  const auto trials = Parse(kValid);
  std::ostringstream out;
  WriteSweepCsv(out, ThresholdSweep(trials), DcfParams{});
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "tau,fmr,fnmr,dcf");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 2 + 2);
}

}  // namespace
}  // namespace riskgate
