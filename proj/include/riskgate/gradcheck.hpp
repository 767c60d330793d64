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

// Central finite-difference verification of every differentiable op.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "riskgate/autodiff.hpp"

namespace riskgate {

struct GradReport {
  std::string op;
  double max_rel_err = 0.0;
  bool pass = false;
};

struct GradGraph {
  // Scalar whose analytic gradient is checked.
  ad::Var root;
  // Scalar terms whose finite-difference slopes form the reference. Their
  // values must sum to root's value.
  std::vector<ad::Var> parts;
};

struct GradCase {
  std::string op;
  std::vector<Tensor> inputs;
  std::function<GradGraph(const std::vector<ad::Var>&)> build;
  // Factor on the finite-difference slope of part p with respect to input
  // i. Only reversal layers need anything other than 1.
  std::function<double(std::size_t part, std::size_t input)> fd_scale;
};

inline constexpr double kFiniteDifferenceStep = 1e-5;
// Relative errors use max(|analytic|, |numeric|, floor * max(1, |f|)) as
// denominator, f being the checked scalar. Components smaller than that are
// below what double-precision central differences resolve.
inline constexpr double kRelativeErrorFloor = 1e-6;

GradReport CheckGradient(const GradCase& c, double tolerance,
                         double step = kFiniteDifferenceStep);

// One case per registered primitive and composite loss, drawn from `seed`.
std::vector<GradCase> GradCases(std::uint64_t seed);
std::vector<std::string> RegisteredOps();

std::vector<GradReport> GradcheckAll(std::uint64_t seed, double tolerance = 1e-4);

}  // namespace riskgate
