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

#include "riskgate/gate.hpp"

#include <stdexcept>
#include <string>

#include "riskgate/errors.hpp"

namespace riskgate {

GateMask ComputeMask(const ad::Var& features, const ad::Var& kernel,
                     const ad::Var& bias) {
  return GateMask{ad::Sigmoid(ad::DepthwiseConv1d(features, kernel, bias))};
}

RoutedFeatures Route(const ad::Var& features, const GateMask& mask) {
  RequireSameShape(features.value(), mask.mask.value(), "route");
  ad::Var identity = ad::Mul(mask.mask, features);
  ad::Var sex = ad::Sub(features, identity);
  return RoutedFeatures{identity, sex};
}

ad::Var CapLoss(const GateMask& mask, double rho_id) {
  if (!(rho_id > 0.0 && rho_id < 1.0)) {
    throw std::invalid_argument("cap_loss: rho_id must lie in (0,1), got " +
                                std::to_string(rho_id));
  }
  return ad::Square(ad::AddScalar(ad::Mean(mask.mask), -rho_id));
}

ad::Var SatLoss(const GateMask& mask) {
  ad::Var complement = ad::AddScalar(ad::Scale(mask.mask, -1.0), 1.0);
  return ad::Mean(ad::Mul(mask.mask, complement));
}

}  // namespace riskgate
