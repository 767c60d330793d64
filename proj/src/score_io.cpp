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

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string_view>

#include "riskgate/errors.hpp"

namespace riskgate {

namespace {

std::vector<std::string_view> SplitCommas(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::string_view Trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) {
    s.remove_suffix(1);
  }
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

[[noreturn]] void Fail(const std::string& source, std::size_t line,
                       const std::string& message) {
  throw InputError(source + ":" + std::to_string(line) + ": " + message);
}

std::vector<TrialRecord> ParseRows(std::istream& in, const std::string& source,
                                   bool with_score) {
  const std::string_view header = with_score ? kScoreHeader : kTrialHeader;
  const std::size_t columns = with_score ? 6 : 5;
  std::vector<TrialRecord> trials;
  std::string raw;
  std::size_t line_no = 0;
  bool seen_header = false;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = Trim(raw);
    if (line.empty() || line.front() == '#') continue;
    if (!seen_header) {
      if (line != header) {
        Fail(source, line_no, "expected header '" + std::string(header) + "'");
      }
      seen_header = true;
      continue;
    }
    const auto fields = SplitCommas(line);
    if (fields.size() != columns) {
      Fail(source, line_no,
           "expected " + std::to_string(columns) + " columns, got " +
               std::to_string(fields.size()));
    }
    TrialRecord t;
    t.enroll_id = std::string(Trim(fields[0]));
    t.test_id = std::string(Trim(fields[1]));
    if (t.enroll_id.empty() || t.test_id.empty()) Fail(source, line_no, "empty id");
    const auto ge = ParseGroup(Trim(fields[2]));
    const auto gt = ParseGroup(Trim(fields[3]));
    if (!ge || !gt) Fail(source, line_no, "group must be M or F");
    t.group_enroll = *ge;
    t.group_test = *gt;
    const std::string_view label = Trim(fields[4]);
    if (label == "mated") {
      t.mated = true;
    } else if (label == "nonmated") {
      t.mated = false;
    } else {
      Fail(source, line_no, "unknown label '" + std::string(label) + "'");
    }
    if (with_score) {
      const std::string_view s = Trim(fields[5]);
      double value = 0.0;
      const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
      if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(value)) {
        Fail(source, line_no, "invalid score '" + std::string(s) + "'");
      }
      t.score = value;
    }
    trials.push_back(std::move(t));
  }
  if (!seen_header) Fail(source, line_no, "missing header");
  return trials;
}

void WriteRows(std::ostream& out, std::span<const TrialRecord> trials,
               bool with_score) {
  out << (with_score ? kScoreHeader : kTrialHeader) << '\n';
  for (const TrialRecord& t : trials) {
    out << t.enroll_id << ',' << t.test_id << ',' << GroupName(t.group_enroll)
        << ',' << GroupName(t.group_test) << ','
        << (t.mated ? "mated" : "nonmated");
    if (with_score) out << ',' << FormatDouble(t.score);
    out << '\n';
  }
}

nlohmann::ordered_json Rate(double fraction) {
  nlohmann::ordered_json j;
  j["fraction"] = fraction;
  j["percent"] = 100.0 * fraction;
  return j;
}

nlohmann::ordered_json RatesToJson(const ErrorRates& r) {
  nlohmann::ordered_json j;
  j["threshold"] = r.threshold;
  j["fmr"] = Rate(r.fmr);
  j["fnmr"] = Rate(r.fnmr);
  j["mated"] = r.mated;
  j["nonmated"] = r.nonmated;
  j["false_matches"] = r.false_matches;
  j["false_non_matches"] = r.false_non_matches;
  return j;
}

}  // namespace

std::string FormatDouble(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::vector<TrialRecord> ParseScores(std::istream& in, const std::string& source) {
  return ParseRows(in, source, /*with_score=*/true);
}

std::vector<TrialRecord> ParseTrialList(std::istream& in, const std::string& source) {
  return ParseRows(in, source, /*with_score=*/false);
}

std::vector<TrialRecord> ReadScoreFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open score file " + path.string());
  return ParseScores(in, path.string());
}

void WriteScores(std::ostream& out, std::span<const TrialRecord> trials) {
  WriteRows(out, trials, /*with_score=*/true);
}

void WriteTrialList(std::ostream& out, std::span<const TrialRecord> trials) {
  WriteRows(out, trials, /*with_score=*/false);
}

void WriteSweepCsv(std::ostream& out, const Sweep& sweep, const DcfParams& params) {
  out << "tau,fmr,fnmr,dcf\n";
  for (const ErrorRates& p : sweep.points) {
    out << FormatDouble(p.threshold) << ',' << FormatDouble(p.fmr) << ','
        << FormatDouble(p.fnmr) << ',' << FormatDouble(DetectionCost(p, params))
        << '\n';
  }
}

nlohmann::ordered_json ReportToJson(const FairnessReport& report,
                                    bool unnormalized_dcf) {
  nlohmann::ordered_json j;
  j["schema"] = "riskgate.fairness_report";
  j["schema_version"] = kReportSchemaVersion;

  nlohmann::ordered_json protocol;
  protocol["num_trials"] = report.num_trials;
  protocol["num_mated"] = report.num_mated;
  protocol["num_nonmated"] = report.num_nonmated;
  protocol["alpha"] = report.config.alpha;
  protocol["fmr_target"] = report.config.fmr_target;
  protocol["p_target"] = report.config.dcf.p_target;
  protocol["c_fnmr"] = report.config.dcf.c_fnmr;
  protocol["c_fmr"] = report.config.dcf.c_fmr;
  protocol["assignment_policy"] = PolicyName(report.config.policy);
  protocol["decision_rule"] = "accept if score >= threshold";
  protocol["few_nonmated_warning"] = report.operating_point.few_nonmated;
  j["protocol"] = protocol;

  nlohmann::ordered_json eer = Rate(report.eer.eer);
  eer["threshold"] = report.eer.threshold;
  j["eer"] = eer;

  nlohmann::ordered_json dcf;
  dcf["primary"] = unnormalized_dcf ? "unnormalized" : "normalized";
  dcf["normalized"] = report.min_dcf.normalized;
  dcf["unnormalized"] = report.min_dcf.unnormalized;
  dcf["threshold"] = report.min_dcf.threshold;
  j["min_dcf"] = dcf;

  j["operating_point"] = RatesToJson(report.operating_point.rates);

  nlohmann::ordered_json groups;
  for (Group g : {Group::kM, Group::kF}) {
    const auto& r = report.subgroup.rates[GroupIndex(g)];
    if (r) {
      groups[GroupName(g)] = RatesToJson(*r);
    } else {
      nlohmann::ordered_json missing;
      missing["missing"] = report.subgroup.missing_reason[GroupIndex(g)];
      groups[GroupName(g)] = missing;
    }
  }
  j["subgroups"] = groups;

  if (report.garbe) {
    j["gini_fmr"] = report.garbe->gini_fmr;
    j["gini_fnmr"] = report.garbe->gini_fnmr;
    j["garbe"] = report.garbe->garbe;
  } else {
    j["gini_fmr"] = nullptr;
    j["gini_fnmr"] = nullptr;
    j["garbe"] = nullptr;
  }
  return j;
}

std::string SummaryLine(const FairnessReport& report, bool unnormalized_dcf) {
  const double dcf =
      unnormalized_dcf ? report.min_dcf.unnormalized : report.min_dcf.normalized;
  char buf[160];
  if (report.garbe) {
    std::snprintf(buf, sizeof(buf), "EER=%.2f%% minDCF=%.4f GARBE=%.2f",
                  100.0 * report.eer.eer, dcf, report.garbe->garbe);
  } else {
    std::snprintf(buf, sizeof(buf), "EER=%.2f%% minDCF=%.4f GARBE=n/a",
                  100.0 * report.eer.eer, dcf);
  }
  return buf;
}

}  // namespace riskgate
