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

#include "riskgate/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <utility>

#include "riskgate/branches.hpp"
#include "riskgate/gate.hpp"
#include "riskgate/group.hpp"
#include "riskgate/model.hpp"
#include "riskgate/objectives.hpp"

namespace riskgate {

namespace {

using ad::Var;
using Leaves = std::vector<Var>;

GradGraph Single(Var root) { return {root, {root}}; }

std::vector<Var> MakeLeaves(const std::vector<Tensor>& values) {
  std::vector<Var> leaves;
  leaves.reserve(values.size());
  for (const Tensor& t : values) leaves.push_back(ad::Param(t));
  return leaves;
}

double EvaluateParts(const GradCase& c, const std::vector<Tensor>& values,
                     std::size_t part) {
  const GradGraph g = c.build(MakeLeaves(values));
  return g.parts.at(part).item();
}

class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : rng_(seed) {}

  Tensor Normal(Shape shape, double scale = 1.0) {
    std::normal_distribution<double> dist(0.0, scale);
    Tensor t(std::move(shape));
    for (double& v : t.storage()) v = dist(rng_);
    return t;
  }

  Tensor Uniform(Shape shape, double lo, double hi) {
    std::uniform_real_distribution<double> dist(lo, hi);
    Tensor t(std::move(shape));
    for (double& v : t.storage()) v = dist(rng_);
    return t;
  }

  // Normal draws pushed at least `gap` away from zero, for kinked ops.
  Tensor AwayFromZero(Shape shape, double gap = 0.1) {
    Tensor t = Normal(std::move(shape));
    for (double& v : t.storage()) {
      if (std::abs(v) < gap) v += v < 0 ? -gap : gap;
    }
    return t;
  }

  std::vector<std::size_t> Indices(std::size_t n, std::size_t bound) {
    std::uniform_int_distribution<std::size_t> dist(0, bound - 1);
    std::vector<std::size_t> out(n);
    for (auto& v : out) v = dist(rng_);
    return out;
  }

 private:
  std::mt19937_64 rng_;
};

// Scalarizes y with a fixed random projection so every output element
// contributes a distinct weight.
Var Project(const Var& y, const Tensor& weights) {
  return ad::Sum(ad::Mul(y, ad::Constant(weights.Reshaped(y.shape()))));
}

struct CaseBuilder {
  Sampler& s;
  std::vector<GradCase>& out;

  // Elementwise or shaped op; the output is scalarized by projection.
  void Projected(std::string op, std::vector<Tensor> inputs, Shape out_shape,
                 std::function<Var(const Leaves&)> fn) {
    const Tensor r = s.Normal(out_shape);
    out.push_back({std::move(op), std::move(inputs),
                   [fn, r](const Leaves& x) { return Single(Project(fn(x), r)); },
                   nullptr});
  }

  void Scalar(std::string op, std::vector<Tensor> inputs,
              std::function<Var(const Leaves&)> fn) {
    out.push_back({std::move(op), std::move(inputs),
                   [fn](const Leaves& x) { return Single(fn(x)); }, nullptr});
  }
};

std::vector<Group> MixedGroups(std::size_t n) {
  std::vector<Group> g(n);
  for (std::size_t i = 0; i < n; ++i) g[i] = (i % 2 == 0) ? Group::kM : Group::kF;
  return g;
}

void AddPrimitiveCases(CaseBuilder& b) {
  Sampler& s = b.s;
  const Shape m{3, 4};
  b.Projected("add", {s.Normal(m), s.Normal(m)}, m,
              [](const Leaves& x) { return ad::Add(x[0], x[1]); });
  b.Projected("sub", {s.Normal(m), s.Normal(m)}, m,
              [](const Leaves& x) { return ad::Sub(x[0], x[1]); });
  b.Projected("mul", {s.Normal(m), s.Normal(m)}, m,
              [](const Leaves& x) { return ad::Mul(x[0], x[1]); });
  b.Projected("scale", {s.Normal(m)}, m,
              [](const Leaves& x) { return ad::Scale(x[0], -1.7); });
  b.Projected("add_scalar", {s.Normal(m)}, m,
              [](const Leaves& x) { return ad::AddScalar(x[0], 0.3); });
  b.Projected("square", {s.Normal(m)}, m,
              [](const Leaves& x) { return ad::Square(x[0]); });
  b.Projected("sigmoid", {s.Normal(m, 2.0)}, m,
              [](const Leaves& x) { return ad::Sigmoid(x[0]); });
  b.Projected("tanh", {s.Normal(m)}, m,
              [](const Leaves& x) { return ad::Tanh(x[0]); });
  b.Projected("relu", {s.AwayFromZero(m)}, m,
              [](const Leaves& x) { return ad::Relu(x[0]); });
  b.Projected("sqrt", {s.Uniform(m, 0.5, 2.0)}, m,
              [](const Leaves& x) { return ad::Sqrt(x[0]); });
  b.Projected("clamp_min", {s.AwayFromZero(m)}, m,
              [](const Leaves& x) { return ad::ClampMin(x[0], 0.0); });
  b.Projected("sum", {s.Normal(m)}, {1},
              [](const Leaves& x) { return ad::Sum(x[0]); });
  b.Projected("mean", {s.Normal(m)}, {1},
              [](const Leaves& x) { return ad::Mean(x[0]); });
  b.Projected("sum_axis", {s.Normal({2, 3, 4})}, {2, 4},
              [](const Leaves& x) { return ad::SumAxis(x[0], 1); });
  b.Projected("mean_axis", {s.Normal({2, 3, 4})}, {3, 4},
              [](const Leaves& x) { return ad::MeanAxis(x[0], 0); });
  b.Projected("reshape", {s.Normal(m)}, {2, 6},
              [](const Leaves& x) { return ad::Reshape(x[0], {2, 6}); });
  b.Projected("transpose", {s.Normal(m)}, {4, 3},
              [](const Leaves& x) { return ad::Transpose(x[0]); });
  b.Projected("matmul", {s.Normal({3, 4}), s.Normal({4, 2})}, {3, 2},
              [](const Leaves& x) { return ad::MatMul(x[0], x[1]); });
  b.Projected("add_bias", {s.Normal(m), s.Normal({4})}, m,
              [](const Leaves& x) { return ad::AddBias(x[0], x[1]); });
  b.Projected("concat", {s.Normal({3, 2}), s.Normal({3, 4})}, {3, 6},
              [](const Leaves& x) { return ad::Concat(x[0], x[1]); });
  {
    const std::vector<std::size_t> idx{4, 0, 4, 2, 1};
    b.Projected("gather", {s.Normal({6})}, {5},
                [idx](const Leaves& x) { return ad::Gather(x[0], idx); });
  }
  b.Projected("dot", {s.Normal(m), s.Normal(m)}, {3},
              [](const Leaves& x) { return ad::Dot(x[0], x[1]); });
  b.Projected("l2_normalize", {s.Normal({3, 5})}, {3, 5},
              [](const Leaves& x) { return ad::L2Normalize(x[0]); });
  b.Projected("depthwise_conv1d",
              {s.Normal({2, 3, 7}), s.Normal({3, 5}), s.Normal({3})}, {2, 3, 7},
              [](const Leaves& x) { return ad::DepthwiseConv1d(x[0], x[1], x[2]); });
  b.Projected("conv1d", {s.Normal({2, 3, 6}), s.Normal({4, 3, 3}), s.Normal({4})},
              {2, 4, 6},
              [](const Leaves& x) { return ad::Conv1d(x[0], x[1], x[2]); });
  b.Projected("softmax", {s.Normal({3, 5})}, {3, 5},
              [](const Leaves& x) { return ad::Softmax(x[0]); });
  b.Projected("weighted_time_sum", {s.Normal({2, 3, 5}), s.Normal({2, 5})}, {2, 3},
              [](const Leaves& x) { return ad::WeightedTimeSum(x[0], x[1]); });
  {
    const auto targets = s.Indices(4, 5);
    b.Projected("cross_entropy_rows", {s.Normal({4, 5}, 2.0)}, {4},
                [targets](const Leaves& x) {
                  return ad::CrossEntropyRows(x[0], targets);
                });
    b.Scalar("cross_entropy", {s.Normal({4, 5}, 2.0)}, [targets](const Leaves& x) {
      return ad::CrossEntropy(x[0], targets);
    });
  }
  {
    const double gamma = 0.5;
    const Tensor r = s.Normal(m);
    b.out.push_back({"grad_reverse", {s.Normal(m)},
                     [r, gamma](const Leaves& x) {
                       return Single(Project(ad::GradReverse(x[0], gamma), r));
                     },
                     [gamma](std::size_t, std::size_t) { return -gamma; }});
  }
  {
    const auto targets = s.Indices(4, 3);
    b.Projected("angular_margin", {s.Uniform({4, 3}, -0.9, 0.9)}, {4, 3},
                [targets](const Leaves& x) {
                  return ad::AngularMargin(x[0], targets, 30.0, 0.2);
                });
  }
}

void AddCompositeCases(CaseBuilder& b) {
  Sampler& s = b.s;
  b.Projected("encode",
              {s.Normal({2, 3, 6}), s.Normal({4, 3, 3}), s.Normal({4}),
               s.Normal({4, 4, 3}, 0.5), s.Normal({4})},
              {2, 4, 6}, [](const Leaves& x) {
                const std::vector<ConvLayerVars> layers{
                    {x[1], x[2], Activation::kRelu}, {x[3], x[4], Activation::kLinear}};
                return Encode(x[0], layers);
              });
  b.Projected("gate_mask", {s.Normal({2, 3, 7}), s.Normal({3, 5}), s.Normal({3})},
              {2, 3, 7}, [](const Leaves& x) {
                return ComputeMask(x[0], x[1], x[2]).mask;
              });
  {
    const Tensor r1 = s.Normal({2, 3, 7}), r2 = s.Normal({2, 3, 7});
    b.out.push_back({"route",
                     {s.Normal({2, 3, 7}), s.Normal({3, 5}), s.Normal({3})},
                     [r1, r2](const Leaves& x) {
                       const RoutedFeatures f =
                           Route(x[0], ComputeMask(x[0], x[1], x[2]));
                       return Single(ad::Add(Project(f.identity, r1),
                                             Project(f.sex, r2)));
                     },
                     nullptr});
  }
  b.Projected("attentive_pool",
              {s.Normal({2, 3, 6}), s.Normal({2, 3}), s.Normal({2}), s.Normal({2})},
              {2, 6}, [](const Leaves& x) {
                return AttentiveStatsPool(x[0], {x[1], x[2], x[3]}).pooled;
              });
  b.Projected("embed", {s.Normal({3, 6}), s.Normal({6, 4}), s.Normal({4})}, {3, 4},
              [](const Leaves& x) { return Embed(x[0], x[1], x[2]); });
  {
    const auto targets = s.Indices(4, 3);
    b.Projected("aam_logits", {s.Normal({4, 3}), s.Normal({3, 3})}, {4, 3},
                [targets](const Leaves& x) {
                  return AamLogits(x[0], targets, x[1], 30.0, 0.2);
                });
    b.Scalar("loss_spk", {s.Normal({4, 3}), s.Normal({3, 3})},
             [targets](const Leaves& x) {
               return SpkLoss(x[0], targets, x[1], 30.0, 0.2).loss;
             });
  }
  b.Scalar("loss_cap", {s.Normal({2, 3, 7}), s.Normal({3, 5}), s.Normal({3})},
           [](const Leaves& x) {
             return CapLoss(ComputeMask(x[0], x[1], x[2]), 0.3);
           });
  b.Scalar("loss_sat", {s.Normal({2, 3, 7}), s.Normal({3, 5}), s.Normal({3})},
           [](const Leaves& x) { return SatLoss(ComputeMask(x[0], x[1], x[2])); });
  {
    const std::vector<Group> groups = MixedGroups(4);
    b.Scalar("loss_sex", {s.Normal({4, 3}), s.Normal({3, 2}), s.Normal({2})},
             [groups](const Leaves& x) { return SexLoss(x[0], groups, x[1], x[2]); });
    const double gamma = 0.5;
    b.out.push_back(
        {"loss_adv",
         {s.Normal({4, 3}), s.Normal({3, 2}), s.Normal({2})},
         [groups, gamma](const Leaves& x) {
           return Single(AdvLoss(x[0], groups, x[1], x[2], gamma));
         },
         [gamma](std::size_t, std::size_t input) { return input == 0 ? -gamma : 1.0; }});
  }
  b.Scalar("loss_decor", {s.Normal({4, 3}), s.Normal({4, 3})},
           [](const Leaves& x) { return DecorLoss(x[0], x[1]); });
  {
    const std::vector<Group> groups{Group::kM, Group::kF, Group::kF,
                                    Group::kM, Group::kF, Group::kM};
    b.Scalar("loss_rex", {s.Uniform({6}, 0.2, 2.0)}, [groups](const Leaves& x) {
      return RexPenalty(x[0], groups, 2).penalty;
    });
  }
}

// End-to-end objective on a tiny model (B=4, C=4, T=8, D=4, 3 speakers).
void AddTotalCase(CaseBuilder& b, std::uint64_t seed) {
  Sampler& s = b.s;
  ModelConfig config;
  config.feature_bins = 3;
  config.channels = 4;
  config.attention_dim = 4;
  config.embedding_dim = 4;
  config.num_speakers = 3;
  const Model init = Model::Initialize(config, seed);

  std::vector<std::string> names;
  std::vector<Tensor> inputs;
  for (const auto& [name, t] : init.params()) {
    names.push_back(name);
    // Move biases and the gate off their neutral initial values.
    Tensor v = t;
    const Tensor noise = s.Normal(t.shape(), 0.3);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += noise[i];
    inputs.push_back(std::move(v));
  }
  const Tensor x = s.Normal({4, config.feature_bins, 8});
  const std::vector<std::size_t> speakers{0, 2, 1, 2};
  const std::vector<Group> groups = MixedGroups(4);

  LossWeights weights;
  weights.lambda_rex = 0.05;
  weights.gamma = 0.5;

  std::size_t adv_w = 0, adv_b = 0;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == param::kAdvHeadWeight) adv_w = i;
    if (names[i] == param::kAdvHeadBias) adv_b = i;
  }

  GradCase c;
  c.op = "loss_total";
  c.inputs = std::move(inputs);
  c.build = [config, names, x, speakers, groups, weights](const Leaves& leaves) {
    std::map<std::string, Var> vars;
    for (std::size_t i = 0; i < names.size(); ++i) vars.emplace(names[i], leaves[i]);
    const BoundModel bound(config, std::move(vars));
    const ForwardPass fwd = Forward(bound, ad::Constant(x));
    ObjectiveInputs in;
    in.mask = fwd.mask;
    in.z_id = fwd.z_id;
    in.z_sex = fwd.z_sex;
    in.speakers = speakers;
    in.groups = groups;
    in.heads = bound.Heads();
    in.aam_scale = config.aam_scale;
    in.aam_margin = config.aam_margin;

    GradGraph g;
    g.root = ComputeTotalLoss(in, weights).total;
    // Reference split: everything except the adversarial term, and that term
    // alone, whose slope below the reversal layer is scaled by -gamma.
    LossWeights no_adv = weights;
    no_adv.lambda_adv = 0.0;
    g.parts.push_back(ComputeTotalLoss(in, no_adv).total);
    g.parts.push_back(ad::Scale(AdvLoss(fwd.z_id, groups, in.heads.adv_weight,
                                        in.heads.adv_bias, weights.gamma),
                                weights.lambda_adv));
    return g;
  };
  const double gamma = weights.gamma;
  c.fd_scale = [adv_w, adv_b, gamma](std::size_t part, std::size_t input) {
    if (part == 0 || input == adv_w || input == adv_b) return 1.0;
    return -gamma;
  };
  b.out.push_back(std::move(c));
}

}  // namespace

GradReport CheckGradient(const GradCase& c, double tolerance, double step) {
  GradReport report;
  report.op = c.op;

  const std::vector<Var> leaves = MakeLeaves(c.inputs);
  const GradGraph g = c.build(leaves);
  ad::Backward(g.root);

  const double floor = kRelativeErrorFloor * std::max(1.0, std::abs(g.root.item()));
  std::vector<Tensor> values = c.inputs;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const Tensor& analytic = leaves[i].grad();
    for (std::size_t k = 0; k < values[i].size(); ++k) {
      const double original = values[i][k];
      double numeric = 0.0;
      for (std::size_t p = 0; p < g.parts.size(); ++p) {
        values[i][k] = original + step;
        const double plus = EvaluateParts(c, values, p);
        values[i][k] = original - step;
        const double minus = EvaluateParts(c, values, p);
        const double scale = c.fd_scale ? c.fd_scale(p, i) : 1.0;
        numeric += scale * (plus - minus) / (2.0 * step);
      }
      values[i][k] = original;
      const double a = analytic[k];
      const double denom = std::max({std::abs(a), std::abs(numeric), floor});
      report.max_rel_err = std::max(report.max_rel_err, std::abs(a - numeric) / denom);
    }
  }
  report.pass = std::isfinite(report.max_rel_err) && report.max_rel_err <= tolerance;
  return report;
}

std::vector<GradCase> GradCases(std::uint64_t seed) {
  Sampler sampler(seed);
  std::vector<GradCase> cases;
  CaseBuilder builder{sampler, cases};
  AddPrimitiveCases(builder);
  AddCompositeCases(builder);
  AddTotalCase(builder, seed);
  return cases;
}

std::vector<std::string> RegisteredOps() {
  std::vector<std::string> names;
  for (const GradCase& c : GradCases(0)) names.push_back(c.op);
  return names;
}

std::vector<GradReport> GradcheckAll(std::uint64_t seed, double tolerance) {
  std::vector<GradReport> reports;
  for (const GradCase& c : GradCases(seed)) {
    reports.push_back(CheckGradient(c, tolerance));
  }
  return reports;
}

}  // namespace riskgate
