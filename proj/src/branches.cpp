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

#include "riskgate/branches.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "riskgate/errors.hpp"

namespace riskgate {

ad::Var Encode(const ad::Var& x, std::span<const ConvLayerVars> layers) {
  if (layers.empty()) throw std::invalid_argument("encode: no layers");
  ad::Var h = x;
  for (const ConvLayerVars& layer : layers) {
    h = ad::Conv1d(h, layer.weight, layer.bias);
    if (layer.activation == Activation::kRelu) h = ad::Relu(h);
  }
  return h;
}

PoolResult AttentiveStatsPool(const ad::Var& frames, const AttentionVars& attn,
                              double eps) {
  RequireRank(frames.value(), 3, "attentive_stats_pool");
  const std::size_t batch = frames.shape()[0], channels = frames.shape()[1],
                    steps = frames.shape()[2];
  const std::size_t hidden = attn.weight.shape().at(0);
  if (attn.weight.shape().at(1) != channels) {
    throw ShapeError("attentive_stats_pool: attention weight " +
                     ShapeString(attn.weight.shape()) + " does not match " +
                     std::to_string(channels) + " channels");
  }
  // Per-frame projections are 1x1 convolutions over the channel axis.
  ad::Var w = ad::Reshape(attn.weight, {hidden, channels, 1});
  ad::Var v = ad::Reshape(attn.context, {1, hidden, 1});
  ad::Var no_bias = ad::Constant(Tensor({1}, 0.0));
  ad::Var energy = ad::Conv1d(ad::Tanh(ad::Conv1d(frames, w, attn.bias)), v, no_bias);
  ad::Var alpha = ad::Softmax(ad::Reshape(energy, {batch, steps}));

  ad::Var mean = ad::WeightedTimeSum(frames, alpha);
  ad::Var second = ad::WeightedTimeSum(ad::Square(frames), alpha);
  ad::Var variance = ad::Sub(second, ad::Square(mean));
  ad::Var stddev = ad::Sqrt(ad::ClampMin(variance, eps));
  return PoolResult{ad::Concat(mean, stddev), alpha};
}

ad::Var Embed(const ad::Var& pooled, const ad::Var& weight, const ad::Var& bias) {
  return ad::AddBias(ad::MatMul(pooled, weight), bias);
}

ad::Var Linear(const ad::Var& z, const ad::Var& weight, const ad::Var& bias) {
  return ad::AddBias(ad::MatMul(z, weight), bias);
}

ad::Var Grl(const ad::Var& z, double gamma) { return ad::GradReverse(z, gamma); }

ad::Var AamLogits(const ad::Var& embeddings, std::span<const std::size_t> targets,
                  const ad::Var& class_weights, double scale, double margin,
                  double eps) {
  ad::Var cosines = ad::MatMul(ad::L2Normalize(embeddings, eps),
                               ad::Transpose(ad::L2Normalize(class_weights, eps)));
  return ad::AngularMargin(cosines, targets, scale, margin);
}

double CosineScore(std::span<const double> a, std::span<const double> b,
                   double eps) {
  if (a.size() != b.size() || a.empty()) {
    throw ShapeError("cosine_score: embeddings differ in dimension");
  }
  double aa = 0.0, bb = 0.0, ab = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    aa += a[i] * a[i];
    bb += b[i] * b[i];
    ab += a[i] * b[i];
  }
  const double na = std::sqrt(aa), nb = std::sqrt(bb);
  if (!(na > eps) || !(nb > eps)) {
    throw DegenerateEmbeddingError("cosine_score: degenerate zero embedding");
  }
  // Normalize first so the result is exactly symmetric in (a, b).
  double score = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) score += (a[i] / na) * (b[i] / nb);
  return std::max(-1.0, std::min(1.0, score));
}

double CosineScore(const Embedding& a, const Embedding& b, double eps) {
  return CosineScore(a.values, b.values, eps);
}

}  // namespace riskgate
