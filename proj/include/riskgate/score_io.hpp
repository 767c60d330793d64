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

// File formats of the evaluation engine.
//
// Score file: UTF-8 text, comma separated, header row
//   enroll_id,test_id,group_enroll,group_test,label,score
// label is "mated" or "nonmated", groups are "M" or "F". Lines starting with
// '#' and blank lines are ignored. A trial list has the same layout without
// the score column.

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "riskgate/metrics.hpp"
#include "json.hpp"

namespace riskgate {

inline constexpr const char* kScoreHeader =
    "enroll_id,test_id,group_enroll,group_test,label,score";
inline constexpr const char* kTrialHeader =
    "enroll_id,test_id,group_enroll,group_test,label";

// Throws InputError naming the offending line.
std::vector<TrialRecord> ParseScores(std::istream& in, const std::string& source);
std::vector<TrialRecord> ReadScoreFile(const std::filesystem::path& path);

// Trial list without scores; returned records carry score 0.
std::vector<TrialRecord> ParseTrialList(std::istream& in, const std::string& source);

void WriteScores(std::ostream& out, std::span<const TrialRecord> trials);
void WriteTrialList(std::ostream& out, std::span<const TrialRecord> trials);

// tau,fmr,fnmr,dcf rows over the full threshold sweep.
void WriteSweepCsv(std::ostream& out, const Sweep& sweep, const DcfParams& params);

inline constexpr int kReportSchemaVersion = 1;

// `unnormalized_dcf` only changes which cost is flagged as primary.
nlohmann::ordered_json ReportToJson(const FairnessReport& report,
                                    bool unnormalized_dcf = false);

// One-line human summary, percentages with two decimals:
//   EER=2.25% minDCF=0.2600 GARBE=0.07
// With unnormalized_dcf the raw detection cost is printed instead.
std::string SummaryLine(const FairnessReport& report, bool unnormalized_dcf = false);

// Shortest round-trip representation of a double.
std::string FormatDouble(double v);

}  // namespace riskgate
