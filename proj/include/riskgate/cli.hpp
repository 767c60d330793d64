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

// Command-line front end. Kept in the library so tests drive the same code
// path as the executable.

#include <iosfwd>
#include <string>
#include <vector>

namespace riskgate {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitInput = 2;
inline constexpr int kExitProtocol = 3;
inline constexpr int kExitNumerical = 4;

// `args` excludes the program name. Failures print a single line
// "error: <category>: <message>" to `err`.
int RunCli(const std::vector<std::string>& args, std::ostream& out,
           std::ostream& err);

// Gate-mask summary for a single utterance mask [C, T].
struct MaskSummary {
  double mean = 0.0;
  double near_binary_fraction = 0.0;  // entries with A(1-A) < 0.05
  std::vector<double> channel_mean;
};

MaskSummary SummarizeMask(const std::vector<std::vector<double>>& mask);

}  // namespace riskgate
