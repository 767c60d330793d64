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

// Local complementary gate: a per-(channel, frame) soft mask that splits a
// feature block into an identity part and a sex part which sum back to the
// input, plus the two regularizers on the mask.

#include "riskgate/autodiff.hpp"

namespace riskgate {

struct GateMask {
  ad::Var mask;  // [B, C, T], entries in (0, 1)
};

struct RoutedFeatures {
  ad::Var identity;  // A * U
  ad::Var sex;       // (1 - A) * U
};

// A = sigmoid(depthwise_conv1d(U; kernel [C, K], bias [C])).
GateMask ComputeMask(const ad::Var& features, const ad::Var& kernel,
                     const ad::Var& bias);

// The sex part is formed as U - A*U rather than (1-A)*U. Both are the same
// function, but the subtraction guarantees identity + sex reconstructs U to
// within one unit in the last place.
RoutedFeatures Route(const ad::Var& features, const GateMask& mask);

// (mean(A) - rho_id)^2 with the mean taken over all B*C*T entries.
// rho_id must lie in (0, 1).
ad::Var CapLoss(const GateMask& mask, double rho_id);

// mean(A * (1 - A)), in [0, 0.25].
ad::Var SatLoss(const GateMask& mask);

}  // namespace riskgate
