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

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "riskgate/errors.hpp"

namespace riskgate {
namespace {

using ad::Constant;

Tensor RandomTensor(Shape shape, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Tensor t(std::move(shape));
  for (double& v : t.storage()) v = normal(rng);
  return t;
}

GateMask ConstantMask(Shape shape, double value) {
  return GateMask{Constant(Tensor(std::move(shape), value))};
}

TEST(ComputeMaskTest, ZeroInputNeutralMask) {
  const GateMask m = ComputeMask(Constant(Tensor({2, 3, 4})), Constant(Tensor({3, 5})),
                                 Constant(Tensor({3})));
  for (double v : m.mask.value().values()) EXPECT_EQ(v, 0.5);
}

TEST(ComputeMaskTest, LargeBiasSaturates) {
  std::mt19937_64 rng(1);
  const GateMask m = ComputeMask(Constant(RandomTensor({2, 3, 4}, rng)),
                                 Constant(Tensor({3, 5})), Constant(Tensor({3}, 50.0)));
  for (double v : m.mask.value().values()) EXPECT_NEAR(v, 1.0, 1e-12);
}

TEST(ComputeMaskTest, RandomInputStrictlyInsideUnitInterval) {
  std::mt19937_64 rng(2);
  const GateMask m = ComputeMask(Constant(RandomTensor({2, 4, 9}, rng)),
                                 Constant(RandomTensor({4, 5}, rng)),
                                 Constant(RandomTensor({4}, rng)));
  EXPECT_EQ(m.mask.shape(), (Shape{2, 4, 9}));
  for (double v : m.mask.value().values()) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
}

TEST(ComputeMaskTest, ChannelMismatchThrows) {
  EXPECT_THROW(ComputeMask(Constant(Tensor({1, 3, 4})), Constant(Tensor({2, 5})),
                           Constant(Tensor({2}))),
               ShapeError);
}

TEST(RouteTest, EvenSplit) {
  std::mt19937_64 rng(3);
  const Tensor u = RandomTensor({2, 3, 4}, rng);
  const RoutedFeatures r = Route(Constant(u), ConstantMask({2, 3, 4}, 0.5));
  for (std::size_t i = 0; i < u.size(); ++i) {
    EXPECT_EQ(r.identity.value()[i], u[i] / 2);
    EXPECT_EQ(r.sex.value()[i], u[i] / 2);
  }
}

TEST(RouteTest, FullIdentityRouting) {
  std::mt19937_64 rng(4);
  const Tensor u = RandomTensor({2, 3, 4}, rng);
  const RoutedFeatures r = Route(Constant(u), ConstantMask({2, 3, 4}, 1.0));
  EXPECT_EQ(r.identity.value(), u);
  for (double v : r.sex.value().values()) EXPECT_EQ(v, 0.0);
}

TEST(RouteTest, ReconstructsWithinOneUlp) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor u = RandomTensor({2, 3, 7}, rng, 10.0);
    const GateMask m = ComputeMask(Constant(u), Constant(RandomTensor({3, 5}, rng)),
                                   Constant(RandomTensor({3}, rng)));
    const RoutedFeatures r = Route(Constant(u), m);
    for (std::size_t i = 0; i < u.size(); ++i) {
      const double sum = r.identity.value()[i] + r.sex.value()[i];
      const double ulp =
          std::nextafter(std::abs(u[i]), INFINITY) - std::abs(u[i]);
      EXPECT_LE(std::abs(sum - u[i]), ulp);
    }
  }
}

TEST(RouteTest, ShapeMismatchThrows) {
  EXPECT_THROW(Route(Constant(Tensor({1, 2, 3})), ConstantMask({1, 2, 4}, 0.5)),
               ShapeError);
}

TEST(CapLossTest, ReferenceValues) {
  EXPECT_EQ(CapLoss(ConstantMask({2, 2, 2}, 0.3), 0.3).item(), 0.0);
  EXPECT_NEAR(CapLoss(ConstantMask({2, 2, 2}, 1.0), 0.5).item(), 0.25, 1e-15);
  EXPECT_NEAR(CapLoss(ConstantMask({2, 2, 2}, 0.5), 0.7).item(), 0.04, 1e-15);
}

TEST(CapLossTest, PermutationInvariant) {
  const Tensor a({1, 2, 3}, {0.1, 0.9, 0.4, 0.3, 0.7, 0.2});
  const Tensor b({1, 2, 3}, {0.7, 0.2, 0.1, 0.4, 0.9, 0.3});
  EXPECT_NEAR(CapLoss({Constant(a)}, 0.6).item(), CapLoss({Constant(b)}, 0.6).item(),
              1e-15);
}

TEST(CapLossTest, RejectsTargetOutsideOpenInterval) {
  for (double rho : {0.0, 1.0, -0.2, 1.5}) {
    EXPECT_THROW(CapLoss(ConstantMask({1, 1, 1}, 0.5), rho), std::invalid_argument);
  }
}

TEST(SatLossTest, ReferenceValues) {
  EXPECT_EQ(SatLoss(ConstantMask({2, 2, 2}, 0.5)).item(), 0.25);
  EXPECT_EQ(SatLoss(ConstantMask({2, 2, 2}, 1.0)).item(), 0.0);
  EXPECT_EQ(SatLoss(ConstantMask({2, 2, 2}, 0.0)).item(), 0.0);
  const Tensor half({1, 2, 2}, {0.5, 0.5, 1.0, 1.0});
  EXPECT_NEAR(SatLoss({Constant(half)}).item(), 0.125, 1e-15);
}

TEST(SatLossTest, BoundedAndDecreasingTowardBinary) {
  double previous = 0.25;
  for (double a = 0.55; a < 1.0; a += 0.05) {
    const double v = SatLoss(ConstantMask({1, 2, 2}, a)).item();
    EXPECT_LT(v, previous);
    EXPECT_GE(v, 0.0);
    previous = v;
  }
}

}  // namespace
}  // namespace riskgate
