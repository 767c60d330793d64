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

// Building blocks of the two-branch embedding pipeline: a small convolutional
// encoder, attentive statistics pooling, affine embedding projection,
// gradient reversal, additive-angular-margin logits and cosine scoring.

#include <cstddef>
#include <span>
#include <vector>

#include "riskgate/autodiff.hpp"

namespace riskgate {

enum class Activation { kLinear, kRelu };

struct ConvLayerVars {
  ad::Var weight;  // [C_out, C_in, K]
  ad::Var bias;    // [C_out]
  Activation activation = Activation::kRelu;
};

// x [B, F, T] -> [B, C, T] through the layer stack; temporal length is
// preserved by "same" zero padding.
ad::Var Encode(const ad::Var& x, std::span<const ConvLayerVars> layers);

struct AttentionVars {
  ad::Var weight;  // [A, C]
  ad::Var bias;    // [A]
  ad::Var context; // [A]
};

struct PoolResult {
  ad::Var pooled;   // [B, 2C] = [weighted mean | weighted std]
  ad::Var weights;  // [B, T], each row sums to one
};

// Single-head attentive statistics pooling:
//   e_t = v . tanh(W h_t + b),  alpha = softmax_t(e)
//   mu = sum_t alpha_t h_t,     sigma = sqrt(max(sum_t alpha_t h_t^2 - mu^2, eps))
PoolResult AttentiveStatsPool(const ad::Var& frames, const AttentionVars& attn,
                              double eps = 1e-8);

// pooled [B, P] * weight [P, D] + bias [D].
ad::Var Embed(const ad::Var& pooled, const ad::Var& weight, const ad::Var& bias);

// Linear classification head: z [B, D] * weight [D, K] + bias [K].
ad::Var Linear(const ad::Var& z, const ad::Var& weight, const ad::Var& bias);

// Gradient reversal with strength gamma >= 0.
ad::Var Grl(const ad::Var& z, double gamma);

// AAM-softmax logits. Embeddings and class rows are L2-normalized
// internally; the target class gets s*cos(theta + m), the rest s*cos(theta).
ad::Var AamLogits(const ad::Var& embeddings, std::span<const std::size_t> targets,
                  const ad::Var& class_weights, double scale, double margin,
                  double eps = 1e-8);

enum class Branch { kIdentity, kSex };

struct Embedding {
  std::vector<double> values;
  Branch branch = Branch::kIdentity;
};

// <a/|a|, b/|b|>. Throws DegenerateEmbeddingError if either norm <= eps.
double CosineScore(std::span<const double> a, std::span<const double> b,
                   double eps = 1e-8);
double CosineScore(const Embedding& a, const Embedding& b, double eps = 1e-8);

}  // namespace riskgate
