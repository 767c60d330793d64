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

// Minimal reverse-mode differentiation over dense tensors.
//
// A graph is built eagerly: every primitive computes its forward value and
// records its parents together with a local gradient rule. Backward() walks
// the graph once in reverse topological order. The order is fixed by the
// construction order of the graph (parents are visited left to right), so
// gradient accumulation is bitwise reproducible for a given program.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "riskgate/tensor.hpp"

namespace riskgate::ad {

struct Node;

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  const Tensor& value() const;
  // Accumulated gradient; zero-filled if Backward() never reached this node.
  const Tensor& grad() const;
  const Shape& shape() const { return value().shape(); }
  const std::string& op() const;
  bool requires_grad() const;
  double item() const { return value().item(); }

  Node* node() const { return node_.get(); }
  explicit operator bool() const { return node_ != nullptr; }

 private:
  std::shared_ptr<Node> node_;
};

struct Node {
  Tensor value;
  Tensor grad;
  std::string op;
  std::vector<Var> parents;
  // Adds this node's contribution into the parents' grad buffers.
  std::function<void(Node&)> backward;
  bool requires_grad = false;
};

// Trainable input.
Var Param(Tensor value);
// Input excluded from differentiation.
Var Constant(Tensor value);

// Seeds d(root)/d(root) = 1 and propagates to every reachable node that
// requires a gradient. Gradients of leaves are overwritten, not accumulated
// across calls.
void Backward(const Var& root);

// Scales the gradient entering every node with the given op name by `factor`
// for the lifetime of the object. Only used to produce negative controls for
// the gradient checker.
class ScopedGradientFault {
 public:
  ScopedGradientFault(std::string op, double factor = 1.5);
  ~ScopedGradientFault();
  ScopedGradientFault(const ScopedGradientFault&) = delete;
  ScopedGradientFault& operator=(const ScopedGradientFault&) = delete;

 private:
  std::string previous_op_;
  double previous_factor_;
};

// ---------------------------------------------------------------------------
// Primitives. All shape checks throw ShapeError; non-finite outputs throw
// NumericalError.
// ---------------------------------------------------------------------------

Var Add(const Var& a, const Var& b);
Var Sub(const Var& a, const Var& b);
Var Mul(const Var& a, const Var& b);
Var Scale(const Var& a, double factor);
Var AddScalar(const Var& a, double offset);
Var Square(const Var& a);

Var Sigmoid(const Var& x);
Var Tanh(const Var& x);
Var Relu(const Var& x);
Var Sqrt(const Var& x);
Var ClampMin(const Var& x, double floor);

// Reductions. Sum/Mean reduce every element to shape {1}; the Axis variants
// drop the given axis (a rank-1 input reduces to shape {1}).
Var Sum(const Var& x);
Var Mean(const Var& x);
Var SumAxis(const Var& x, std::size_t axis);
Var MeanAxis(const Var& x, std::size_t axis);

Var Reshape(const Var& x, Shape shape);
Var Transpose(const Var& x);  // rank 2
Var MatMul(const Var& a, const Var& b);  // [M,K] x [K,N]
// x[B,N] + bias[N] broadcast over rows.
Var AddBias(const Var& x, const Var& bias);
// Concatenation of two rank-2 tensors along axis 1.
Var Concat(const Var& a, const Var& b);
// Elements of a rank-1 tensor at the given indices.
Var Gather(const Var& x, std::span<const std::size_t> indices);

// Inner product. Rank-1 inputs give shape {1}; rank-2 inputs give one inner
// product per row, shape [B].
Var Dot(const Var& a, const Var& b);
// Unit L2 norm for a vector, or for each row of a matrix. Throws
// DegenerateEmbeddingError when a norm is <= eps.
Var L2Normalize(const Var& x, double eps = 1e-12);

// Depthwise temporal convolution, zero "same" padding of (K-1)/2 per side:
// out[b,c,t] = bias[c] + sum_k kernel[c,k] * x[b,c,t+k-(K-1)/2].
Var DepthwiseConv1d(const Var& x, const Var& kernel, const Var& bias);
// Dense temporal convolution with the same padding rule:
// out[b,o,t] = bias[o] + sum_{i,k} weight[o,i,k] * x[b,i,t+k-(K-1)/2].
Var Conv1d(const Var& x, const Var& weight, const Var& bias);

// Softmax over the last axis of a rank-2 tensor.
Var Softmax(const Var& x);
// out[b,c] = sum_t weights[b,t] * x[b,c,t].
Var WeightedTimeSum(const Var& x, const Var& weights);

// Per-row cross-entropy -log softmax(logits)[target], shape [B].
Var CrossEntropyRows(const Var& logits, std::span<const std::size_t> targets);
// Batch mean of CrossEntropyRows.
Var CrossEntropy(const Var& logits, std::span<const std::size_t> targets);

// Identity forward; backward multiplies the upstream gradient by -gamma.
Var GradReverse(const Var& x, double gamma);

// Additive angular margin on cosine logits: out[b,j] = scale * cos_j for
// j != target[b] and scale * cos(acos(cos_t) + margin) for the target.
Var AngularMargin(const Var& cosines, std::span<const std::size_t> targets,
                  double scale, double margin);

}  // namespace riskgate::ad
