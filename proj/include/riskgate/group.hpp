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

#include <cstddef>
#include <optional>
#include <string_view>

namespace riskgate {

// Binary proxy sex group. The numeric value doubles as the class index for
// the sex classifiers and as the group index for risk equalization.
enum class Group : std::size_t { kM = 0, kF = 1 };

inline constexpr std::size_t kNumGroups = 2;

inline std::size_t GroupIndex(Group g) { return static_cast<std::size_t>(g); }

inline const char* GroupName(Group g) { return g == Group::kM ? "M" : "F"; }

inline std::optional<Group> ParseGroup(std::string_view s) {
  if (s == "M") return Group::kM;
  if (s == "F") return Group::kF;
  return std::nullopt;
}

}  // namespace riskgate
