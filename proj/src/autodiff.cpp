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

#include "riskgate/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <unordered_set>
#include <utility>

#include "riskgate/errors.hpp"

namespace riskgate::ad {

namespace {

thread_local std::string g_fault_op;
thread_local double g_fault_factor = 1.0;

using BackwardRule = std::function<void(Node&)>;

Var MakeNode(std::string op, Tensor value, std::vector<Var> parents,
             BackwardRule backward) {
  if (!value.AllFinite()) {
    throw NumericalError("non-finite output in op '" + op + "'");
  }
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->op = std::move(op);
  for (const Var& p : parents) {
    node->requires_grad = node->requires_grad || p.requires_grad();
  }
  if (node->requires_grad) {
    node->parents = std::move(parents);
    node->backward = std::move(backward);
  }
  return Var(std::move(node));
}

// Gradient buffer of a parent, or nullptr when it needs none.
Tensor* GradBuffer(const Var& v) {
  Node* n = v.node();
  return n->requires_grad ? &n->grad : nullptr;
}

Shape ReducedShape(const Shape& shape, std::size_t axis) {
  Shape out;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i != axis) out.push_back(shape[i]);
  }
  if (out.empty()) out.push_back(1);
  return out;
}

std::size_t CheckedPadding(std::size_t width, const char* what) {
  if (width % 2 == 0) {
    throw ShapeError(std::string(what) + ": kernel width must be odd, got " +
                     std::to_string(width));
  }
  return (width - 1) / 2;
}

void CheckTargets(std::span<const std::size_t> targets, std::size_t rows,
                  std::size_t classes, const char* what) {
  if (targets.size() != rows) {
    throw ShapeError(std::string(what) + ": expected " + std::to_string(rows) +
                     " targets, got " + std::to_string(targets.size()));
  }
  for (std::size_t t : targets) {
    if (t >= classes) {
      throw ShapeError(std::string(what) + ": target " + std::to_string(t) +
                       " out of range for " + std::to_string(classes) +
                       " classes");
    }
  }
}

template <typename Fwd, typename Deriv>
Var Elementwise(const char* op, const Var& x, Fwd fwd, Deriv deriv) {
  const Tensor& in = x.value();
  Tensor out(in.shape());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = fwd(in[i]);
  return MakeNode(op, std::move(out), {x}, [deriv](Node& self) {
    const Tensor& xin = self.parents[0].value();
    Tensor* gx = GradBuffer(self.parents[0]);
    if (!gx) return;
    for (std::size_t i = 0; i < xin.size(); ++i) {
      (*gx)[i] += self.grad[i] * deriv(xin[i], self.value[i]);
    }
  });
}

}  // namespace

const Tensor& Var::value() const { return node_->value; }
const Tensor& Var::grad() const { return node_->grad; }
const std::string& Var::op() const { return node_->op; }
bool Var::requires_grad() const { return node_->requires_grad; }

Var Param(Tensor value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->op = "param";
  node->requires_grad = true;
  return Var(std::move(node));
}

Var Constant(Tensor value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->op = "constant";
  return Var(std::move(node));
}

ScopedGradientFault::ScopedGradientFault(std::string op, double factor)
    : previous_op_(std::move(g_fault_op)), previous_factor_(g_fault_factor) {
  g_fault_op = std::move(op);
  g_fault_factor = factor;
}

ScopedGradientFault::~ScopedGradientFault() {
  g_fault_op = std::move(previous_op_);
  g_fault_factor = previous_factor_;
}

void Backward(const Var& root) {
  if (!root.requires_grad()) return;

  // Iterative post-order DFS; parents are expanded left to right.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node(), 0);
  visited.insert(root.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].node();
      if (parent->requires_grad && visited.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* n : order) n->grad = Tensor(n->value.shape(), 0.0);
  std::fill(root.node()->grad.storage().begin(),
            root.node()->grad.storage().end(), 1.0);

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (!n->backward) continue;
    if (!g_fault_op.empty() && n->op == g_fault_op) {
      for (double& g : n->grad.storage()) g *= g_fault_factor;
    }
    n->backward(*n);
  }
}

// ---------------------------------------------------------------------------
// Elementwise arithmetic
// ---------------------------------------------------------------------------

Var Add(const Var& a, const Var& b) {
  RequireSameShape(a.value(), b.value(), "add");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + b.value()[i];
  return MakeNode("add", std::move(out), {a, b}, [](Node& self) {
    for (int p = 0; p < 2; ++p) {
      if (Tensor* g = GradBuffer(self.parents[p])) {
        for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
      }
    }
  });
}

Var Sub(const Var& a, const Var& b) {
  RequireSameShape(a.value(), b.value(), "sub");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] - b.value()[i];
  return MakeNode("sub", std::move(out), {a, b}, [](Node& self) {
    if (Tensor* g = GradBuffer(self.parents[0])) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
    }
    if (Tensor* g = GradBuffer(self.parents[1])) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] -= self.grad[i];
    }
  });
}

Var Mul(const Var& a, const Var& b) {
  RequireSameShape(a.value(), b.value(), "mul");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
  return MakeNode("mul", std::move(out), {a, b}, [](Node& self) {
    const Tensor& av = self.parents[0].value();
    const Tensor& bv = self.parents[1].value();
    if (Tensor* g = GradBuffer(self.parents[0])) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * bv[i];
    }
    if (Tensor* g = GradBuffer(self.parents[1])) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * av[i];
    }
  });
}

Var Scale(const Var& a, double factor) {
  return Elementwise(
      "scale", a, [factor](double x) { return factor * x; },
      [factor](double, double) { return factor; });
}

Var AddScalar(const Var& a, double offset) {
  return Elementwise(
      "add_scalar", a, [offset](double x) { return x + offset; },
      [](double, double) { return 1.0; });
}

Var Square(const Var& a) {
  return Elementwise(
      "square", a, [](double x) { return x * x; },
      [](double x, double) { return 2.0 * x; });
}

// ---------------------------------------------------------------------------
// Nonlinearities
// ---------------------------------------------------------------------------

Var Sigmoid(const Var& x) {
  return Elementwise(
      "sigmoid", x,
      [](double v) {
        // Branch on sign so exp() never overflows.
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var Tanh(const Var& x) {
  return Elementwise(
      "tanh", x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Var Relu(const Var& x) {
  return Elementwise(
      "relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Var Sqrt(const Var& x) {
  for (double v : x.value().values()) {
    if (!(v > 0.0)) throw NumericalError("sqrt: argument must be positive");
  }
  return Elementwise(
      "sqrt", x, [](double v) { return std::sqrt(v); },
      [](double, double y) { return 0.5 / y; });
}

Var ClampMin(const Var& x, double floor) {
  return Elementwise(
      "clamp_min", x, [floor](double v) { return v > floor ? v : floor; },
      [floor](double v, double) { return v > floor ? 1.0 : 0.0; });
}

// ---------------------------------------------------------------------------
// Reductions and reshaping
// ---------------------------------------------------------------------------

Var Sum(const Var& x) {
  double total = 0.0;
  for (double v : x.value().values()) total += v;
  return MakeNode("sum", Tensor::Scalar(total), {x}, [](Node& self) {
    if (Tensor* g = GradBuffer(self.parents[0])) {
      const double up = self.grad[0];
      for (double& v : g->storage()) v += up;
    }
  });
}

Var Mean(const Var& x) {
  const double n = static_cast<double>(x.value().size());
  double total = 0.0;
  for (double v : x.value().values()) total += v;
  return MakeNode("mean", Tensor::Scalar(total / n), {x}, [n](Node& self) {
    if (Tensor* g = GradBuffer(self.parents[0])) {
      const double up = self.grad[0] / n;
      for (double& v : g->storage()) v += up;
    }
  });
}

namespace {

// Views shape as [outer, extent, inner] around `axis`.
struct AxisSplit {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisSplit SplitAt(const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) {
    throw ShapeError("reduction axis " + std::to_string(axis) +
                     " out of range for " + ShapeString(shape));
  }
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

Var ReduceAxis(const char* op, const Var& x, std::size_t axis, double weight) {
  const AxisSplit s = SplitAt(x.shape(), axis);
  Tensor out(ReducedShape(x.shape(), axis));
  const Tensor& in = x.value();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      double acc = 0.0;
      for (std::size_t e = 0; e < s.extent; ++e) {
        acc += in[(o * s.extent + e) * s.inner + i];
      }
      out[o * s.inner + i] = acc * weight;
    }
  }
  return MakeNode(op, std::move(out), {x}, [s, weight](Node& self) {
    Tensor* g = GradBuffer(self.parents[0]);
    if (!g) return;
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t i = 0; i < s.inner; ++i) {
        const double up = self.grad[o * s.inner + i] * weight;
        for (std::size_t e = 0; e < s.extent; ++e) {
          (*g)[(o * s.extent + e) * s.inner + i] += up;
        }
      }
    }
  });
}

}  // namespace

Var SumAxis(const Var& x, std::size_t axis) {
  return ReduceAxis("sum_axis", x, axis, 1.0);
}

Var MeanAxis(const Var& x, std::size_t axis) {
  const AxisSplit s = SplitAt(x.shape(), axis);
  return ReduceAxis("mean_axis", x, axis, 1.0 / static_cast<double>(s.extent));
}

Var Reshape(const Var& x, Shape shape) {
  if (NumElements(shape) != x.value().size()) {
    throw ShapeError("reshape: cannot view " + ShapeString(x.shape()) + " as " +
                     ShapeString(shape));
  }
  return MakeNode("reshape", x.value().Reshaped(std::move(shape)), {x},
                  [](Node& self) {
                    if (Tensor* g = GradBuffer(self.parents[0])) {
                      for (std::size_t i = 0; i < g->size(); ++i) {
                        (*g)[i] += self.grad[i];
                      }
                    }
                  });
}

Var Transpose(const Var& x) {
  RequireRank(x.value(), 2, "transpose");
  const std::size_t rows = x.shape()[0], cols = x.shape()[1];
  Tensor out({cols, rows});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out.at(c, r) = x.value().at(r, c);
  }
  return MakeNode("transpose", std::move(out), {x}, [rows, cols](Node& self) {
    Tensor* g = GradBuffer(self.parents[0]);
    if (!g) return;
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) g->at(r, c) += self.grad.at(c, r);
    }
  });
}

Var MatMul(const Var& a, const Var& b) {
  RequireRank(a.value(), 2, "matmul");
  RequireRank(b.value(), 2, "matmul");
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  if (b.shape()[0] != k) {
    throw ShapeError("matmul: inner dimensions differ " + ShapeString(a.shape()) +
                     " x " + ShapeString(b.shape()));
  }
  Tensor out({m, n});
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av.at(i, p);
      for (std::size_t j = 0; j < n; ++j) out.at(i, j) += aip * bv.at(p, j);
    }
  }
  return MakeNode("matmul", std::move(out), {a, b}, [m, k, n](Node& self) {
    const Tensor& av = self.parents[0].value();
    const Tensor& bv = self.parents[1].value();
    if (Tensor* ga = GradBuffer(self.parents[0])) {
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += self.grad.at(i, j) * bv.at(p, j);
          ga->at(i, p) += acc;
        }
      }
    }
    if (Tensor* gb = GradBuffer(self.parents[1])) {
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = av.at(i, p);
          for (std::size_t j = 0; j < n; ++j) gb->at(p, j) += aip * self.grad.at(i, j);
        }
      }
    }
  });
}

Var AddBias(const Var& x, const Var& bias) {
  RequireRank(x.value(), 2, "add_bias");
  RequireRank(bias.value(), 1, "add_bias");
  const std::size_t rows = x.shape()[0], cols = x.shape()[1];
  if (bias.shape()[0] != cols) {
    throw ShapeError("add_bias: bias " + ShapeString(bias.shape()) +
                     " does not match " + ShapeString(x.shape()));
  }
  Tensor out = x.value();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out.at(r, c) += bias.value()[c];
  }
  return MakeNode("add_bias", std::move(out), {x, bias}, [rows, cols](Node& self) {
    if (Tensor* gx = GradBuffer(self.parents[0])) {
      for (std::size_t i = 0; i < gx->size(); ++i) (*gx)[i] += self.grad[i];
    }
    if (Tensor* gb = GradBuffer(self.parents[1])) {
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) (*gb)[c] += self.grad.at(r, c);
      }
    }
  });
}

Var Concat(const Var& a, const Var& b) {
  RequireRank(a.value(), 2, "concat");
  RequireRank(b.value(), 2, "concat");
  const std::size_t rows = a.shape()[0];
  if (b.shape()[0] != rows) {
    throw ShapeError("concat: row counts differ " + ShapeString(a.shape()) +
                     " vs " + ShapeString(b.shape()));
  }
  const std::size_t na = a.shape()[1], nb = b.shape()[1];
  Tensor out({rows, na + nb});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < na; ++c) out.at(r, c) = a.value().at(r, c);
    for (std::size_t c = 0; c < nb; ++c) out.at(r, na + c) = b.value().at(r, c);
  }
  return MakeNode("concat", std::move(out), {a, b}, [rows, na, nb](Node& self) {
    if (Tensor* ga = GradBuffer(self.parents[0])) {
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < na; ++c) ga->at(r, c) += self.grad.at(r, c);
      }
    }
    if (Tensor* gb = GradBuffer(self.parents[1])) {
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < nb; ++c) gb->at(r, c) += self.grad.at(r, na + c);
      }
    }
  });
}

Var Gather(const Var& x, std::span<const std::size_t> indices) {
  RequireRank(x.value(), 1, "gather");
  if (indices.empty()) throw ShapeError("gather: no indices");
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  Tensor out({idx.size()});
  for (std::size_t j = 0; j < idx.size(); ++j) {
    if (idx[j] >= x.value().size()) {
      throw ShapeError("gather: index " + std::to_string(idx[j]) + " out of range");
    }
    out[j] = x.value()[idx[j]];
  }
  return MakeNode("gather", std::move(out), {x}, [idx](Node& self) {
    if (Tensor* g = GradBuffer(self.parents[0])) {
      for (std::size_t j = 0; j < idx.size(); ++j) (*g)[idx[j]] += self.grad[j];
    }
  });
}

// ---------------------------------------------------------------------------
// Vector geometry
// ---------------------------------------------------------------------------

Var Dot(const Var& a, const Var& b) {
  RequireSameShape(a.value(), b.value(), "dot");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  std::size_t rows = 1, cols = av.size();
  if (av.rank() == 2) {
    rows = av.dim(0);
    cols = av.dim(1);
  } else if (av.rank() != 1) {
    throw ShapeError("dot: expected rank 1 or 2, got " + ShapeString(av.shape()));
  }
  Tensor out({rows});
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += av[r * cols + c] * bv[r * cols + c];
    out[r] = acc;
  }
  return MakeNode("dot", std::move(out), {a, b}, [rows, cols](Node& self) {
    const Tensor& av = self.parents[0].value();
    const Tensor& bv = self.parents[1].value();
    Tensor* ga = GradBuffer(self.parents[0]);
    Tensor* gb = GradBuffer(self.parents[1]);
    for (std::size_t r = 0; r < rows; ++r) {
      const double up = self.grad[r];
      for (std::size_t c = 0; c < cols; ++c) {
        if (ga) (*ga)[r * cols + c] += up * bv[r * cols + c];
        if (gb) (*gb)[r * cols + c] += up * av[r * cols + c];
      }
    }
  });
}

Var L2Normalize(const Var& x, double eps) {
  const Tensor& in = x.value();
  std::size_t rows = 1, cols = in.size();
  if (in.rank() == 2) {
    rows = in.dim(0);
    cols = in.dim(1);
  } else if (in.rank() != 1) {
    throw ShapeError("l2_normalize: expected rank 1 or 2, got " +
                     ShapeString(in.shape()));
  }
  Tensor out(in.shape());
  std::vector<double> norms(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double ss = 0.0;
    for (std::size_t c = 0; c < cols; ++c) ss += in[r * cols + c] * in[r * cols + c];
    const double norm = std::sqrt(ss);
    if (!(norm > eps)) {
      throw DegenerateEmbeddingError("l2_normalize: vector norm " +
                                     std::to_string(norm) + " <= " +
                                     std::to_string(eps));
    }
    norms[r] = norm;
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = in[r * cols + c] / norm;
  }
  return MakeNode("l2_normalize", std::move(out), {x},
                  [rows, cols, norms](Node& self) {
                    Tensor* g = GradBuffer(self.parents[0]);
                    if (!g) return;
                    const Tensor& y = self.value;
                    for (std::size_t r = 0; r < rows; ++r) {
                      double yg = 0.0;
                      for (std::size_t c = 0; c < cols; ++c) {
                        yg += y[r * cols + c] * self.grad[r * cols + c];
                      }
                      for (std::size_t c = 0; c < cols; ++c) {
                        const std::size_t i = r * cols + c;
                        (*g)[i] += (self.grad[i] - y[i] * yg) / norms[r];
                      }
                    }
                  });
}

// ---------------------------------------------------------------------------
// Temporal convolutions
// ---------------------------------------------------------------------------

Var DepthwiseConv1d(const Var& x, const Var& kernel, const Var& bias) {
  RequireRank(x.value(), 3, "depthwise_conv1d input");
  RequireRank(kernel.value(), 2, "depthwise_conv1d kernel");
  RequireRank(bias.value(), 1, "depthwise_conv1d bias");
  const std::size_t batch = x.shape()[0], channels = x.shape()[1],
                    frames = x.shape()[2], width = kernel.shape()[1];
  if (kernel.shape()[0] != channels || bias.shape()[0] != channels) {
    throw ShapeError("depthwise_conv1d: channel mismatch between input " +
                     ShapeString(x.shape()) + ", kernel " +
                     ShapeString(kernel.shape()) + " and bias " +
                     ShapeString(bias.shape()));
  }
  const std::size_t pad = CheckedPadding(width, "depthwise_conv1d");
  const Tensor& in = x.value();
  const Tensor& kv = kernel.value();
  Tensor out(x.shape());
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t c = 0; c < channels; ++c) {
      for (std::size_t t = 0; t < frames; ++t) {
        double acc = bias.value()[c];
        for (std::size_t k = 0; k < width; ++k) {
          const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + k) -
                                     static_cast<std::ptrdiff_t>(pad);
          if (src < 0 || src >= static_cast<std::ptrdiff_t>(frames)) continue;
          acc += kv.at(c, k) * in.at(b, c, static_cast<std::size_t>(src));
        }
        out.at(b, c, t) = acc;
      }
    }
  }
  return MakeNode(
      "depthwise_conv1d", std::move(out), {x, kernel, bias},
      [batch, channels, frames, width, pad](Node& self) {
        const Tensor& in = self.parents[0].value();
        const Tensor& kv = self.parents[1].value();
        Tensor* gx = GradBuffer(self.parents[0]);
        Tensor* gk = GradBuffer(self.parents[1]);
        Tensor* gbias = GradBuffer(self.parents[2]);
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t c = 0; c < channels; ++c) {
            for (std::size_t t = 0; t < frames; ++t) {
              const double up = self.grad.at(b, c, t);
              if (gbias) (*gbias)[c] += up;
              for (std::size_t k = 0; k < width; ++k) {
                const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + k) -
                                           static_cast<std::ptrdiff_t>(pad);
                if (src < 0 || src >= static_cast<std::ptrdiff_t>(frames)) continue;
                const auto s = static_cast<std::size_t>(src);
                if (gx) gx->at(b, c, s) += kv.at(c, k) * up;
                if (gk) gk->at(c, k) += in.at(b, c, s) * up;
              }
            }
          }
        }
      });
}

Var Conv1d(const Var& x, const Var& weight, const Var& bias) {
  RequireRank(x.value(), 3, "conv1d input");
  RequireRank(weight.value(), 3, "conv1d weight");
  RequireRank(bias.value(), 1, "conv1d bias");
  const std::size_t batch = x.shape()[0], in_ch = x.shape()[1],
                    frames = x.shape()[2], out_ch = weight.shape()[0],
                    width = weight.shape()[2];
  if (weight.shape()[1] != in_ch || bias.shape()[0] != out_ch) {
    throw ShapeError("conv1d: channel mismatch between input " +
                     ShapeString(x.shape()) + ", weight " +
                     ShapeString(weight.shape()) + " and bias " +
                     ShapeString(bias.shape()));
  }
  const std::size_t pad = CheckedPadding(width, "conv1d");
  const Tensor& in = x.value();
  const Tensor& wv = weight.value();
  Tensor out({batch, out_ch, frames});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t o = 0; o < out_ch; ++o) {
      for (std::size_t t = 0; t < frames; ++t) out.at(b, o, t) = bias.value()[o];
      for (std::size_t i = 0; i < in_ch; ++i) {
        for (std::size_t k = 0; k < width; ++k) {
          const double w = wv[(o * in_ch + i) * width + k];
          for (std::size_t t = 0; t < frames; ++t) {
            const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + k) -
                                       static_cast<std::ptrdiff_t>(pad);
            if (src < 0 || src >= static_cast<std::ptrdiff_t>(frames)) continue;
            out.at(b, o, t) += w * in.at(b, i, static_cast<std::size_t>(src));
          }
        }
      }
    }
  }
  return MakeNode(
      "conv1d", std::move(out), {x, weight, bias},
      [batch, in_ch, out_ch, frames, width, pad](Node& self) {
        const Tensor& in = self.parents[0].value();
        const Tensor& wv = self.parents[1].value();
        Tensor* gx = GradBuffer(self.parents[0]);
        Tensor* gw = GradBuffer(self.parents[1]);
        Tensor* gbias = GradBuffer(self.parents[2]);
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t o = 0; o < out_ch; ++o) {
            if (gbias) {
              for (std::size_t t = 0; t < frames; ++t) (*gbias)[o] += self.grad.at(b, o, t);
            }
            for (std::size_t i = 0; i < in_ch; ++i) {
              for (std::size_t k = 0; k < width; ++k) {
                const std::size_t widx = (o * in_ch + i) * width + k;
                const double w = wv[widx];
                double gw_acc = 0.0;
                for (std::size_t t = 0; t < frames; ++t) {
                  const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + k) -
                                             static_cast<std::ptrdiff_t>(pad);
                  if (src < 0 || src >= static_cast<std::ptrdiff_t>(frames)) continue;
                  const auto s = static_cast<std::size_t>(src);
                  const double up = self.grad.at(b, o, t);
                  if (gx) gx->at(b, i, s) += w * up;
                  gw_acc += in.at(b, i, s) * up;
                }
                if (gw) (*gw)[widx] += gw_acc;
              }
            }
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Attention helpers
// ---------------------------------------------------------------------------

Var Softmax(const Var& x) {
  RequireRank(x.value(), 2, "softmax");
  const std::size_t rows = x.shape()[0], cols = x.shape()[1];
  Tensor out(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < cols; ++c) mx = std::max(mx, x.value().at(r, c));
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      out.at(r, c) = std::exp(x.value().at(r, c) - mx);
      z += out.at(r, c);
    }
    for (std::size_t c = 0; c < cols; ++c) out.at(r, c) /= z;
  }
  return MakeNode("softmax", std::move(out), {x}, [rows, cols](Node& self) {
    Tensor* g = GradBuffer(self.parents[0]);
    if (!g) return;
    for (std::size_t r = 0; r < rows; ++r) {
      double gy = 0.0;
      for (std::size_t c = 0; c < cols; ++c) gy += self.grad.at(r, c) * self.value.at(r, c);
      for (std::size_t c = 0; c < cols; ++c) {
        g->at(r, c) += self.value.at(r, c) * (self.grad.at(r, c) - gy);
      }
    }
  });
}

Var WeightedTimeSum(const Var& x, const Var& weights) {
  RequireRank(x.value(), 3, "weighted_time_sum input");
  RequireRank(weights.value(), 2, "weighted_time_sum weights");
  const std::size_t batch = x.shape()[0], channels = x.shape()[1],
                    frames = x.shape()[2];
  if (weights.shape()[0] != batch || weights.shape()[1] != frames) {
    throw ShapeError("weighted_time_sum: weights " + ShapeString(weights.shape()) +
                     " do not match input " + ShapeString(x.shape()));
  }
  Tensor out({batch, channels});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t c = 0; c < channels; ++c) {
      double acc = 0.0;
      for (std::size_t t = 0; t < frames; ++t) {
        acc += weights.value().at(b, t) * x.value().at(b, c, t);
      }
      out.at(b, c) = acc;
    }
  }
  return MakeNode("weighted_time_sum", std::move(out), {x, weights},
                  [batch, channels, frames](Node& self) {
                    const Tensor& xv = self.parents[0].value();
                    const Tensor& wv = self.parents[1].value();
                    Tensor* gx = GradBuffer(self.parents[0]);
                    Tensor* gw = GradBuffer(self.parents[1]);
                    for (std::size_t b = 0; b < batch; ++b) {
                      for (std::size_t c = 0; c < channels; ++c) {
                        const double up = self.grad.at(b, c);
                        for (std::size_t t = 0; t < frames; ++t) {
                          if (gx) gx->at(b, c, t) += wv.at(b, t) * up;
                          if (gw) gw->at(b, t) += xv.at(b, c, t) * up;
                        }
                      }
                    }
                  });
}

// ---------------------------------------------------------------------------
// Classification losses
// ---------------------------------------------------------------------------

Var CrossEntropyRows(const Var& logits, std::span<const std::size_t> targets) {
  RequireRank(logits.value(), 2, "cross_entropy");
  const std::size_t rows = logits.shape()[0], classes = logits.shape()[1];
  CheckTargets(targets, rows, classes, "cross_entropy");
  std::vector<std::size_t> tgt(targets.begin(), targets.end());
  const Tensor& lv = logits.value();
  Tensor out({rows});
  // Softmax probabilities are kept for the backward pass.
  Tensor probs(lv.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < classes; ++c) mx = std::max(mx, lv.at(r, c));
    double z = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      probs.at(r, c) = std::exp(lv.at(r, c) - mx);
      z += probs.at(r, c);
    }
    for (std::size_t c = 0; c < classes; ++c) probs.at(r, c) /= z;
    // log-sum-exp form of -log p_target; never evaluates log(0).
    out[r] = (mx + std::log(z)) - lv.at(r, tgt[r]);
  }
  return MakeNode("cross_entropy", std::move(out), {logits},
                  [rows, classes, tgt, probs = std::move(probs)](Node& self) {
                    Tensor* g = GradBuffer(self.parents[0]);
                    if (!g) return;
                    for (std::size_t r = 0; r < rows; ++r) {
                      const double up = self.grad[r];
                      for (std::size_t c = 0; c < classes; ++c) {
                        const double onehot = (c == tgt[r]) ? 1.0 : 0.0;
                        g->at(r, c) += up * (probs.at(r, c) - onehot);
                      }
                    }
                  });
}

Var CrossEntropy(const Var& logits, std::span<const std::size_t> targets) {
  return Mean(CrossEntropyRows(logits, targets));
}

Var GradReverse(const Var& x, double gamma) {
  if (!(gamma >= 0.0)) {
    throw std::invalid_argument("grad_reverse: gamma must be >= 0");
  }
  return MakeNode("grad_reverse", x.value(), {x}, [gamma](Node& self) {
    if (Tensor* g = GradBuffer(self.parents[0])) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += -gamma * self.grad[i];
    }
  });
}

Var AngularMargin(const Var& cosines, std::span<const std::size_t> targets,
                  double scale, double margin) {
  RequireRank(cosines.value(), 2, "angular_margin");
  const std::size_t rows = cosines.shape()[0], classes = cosines.shape()[1];
  CheckTargets(targets, rows, classes, "angular_margin");
  std::vector<std::size_t> tgt(targets.begin(), targets.end());
  const double cos_m = std::cos(margin), sin_m = std::sin(margin);
  Tensor out(cosines.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < classes; ++c) {
      const double cv = cosines.value().at(r, c);
      if (c == tgt[r]) {
        // cos(theta + m) = cos(theta) cos(m) - sin(theta) sin(m)
        const double sin_theta = std::sqrt(std::max(0.0, 1.0 - cv * cv));
        out.at(r, c) = scale * (cv * cos_m - sin_theta * sin_m);
      } else {
        out.at(r, c) = scale * cv;
      }
    }
  }
  return MakeNode(
      "angular_margin", std::move(out), {cosines},
      [rows, classes, tgt, scale, cos_m, sin_m](Node& self) {
        Tensor* g = GradBuffer(self.parents[0]);
        if (!g) return;
        const Tensor& cvs = self.parents[0].value();
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < classes; ++c) {
            double local = scale;
            if (c == tgt[r]) {
              const double cv = cvs.at(r, c);
              // d/dc sin(theta) = -c / sin(theta), singular at |c| = 1.
              const double sin_theta = std::sqrt(std::max(1e-12, 1.0 - cv * cv));
              local = scale * (cos_m + cv * sin_m / sin_theta);
            }
            g->at(r, c) += self.grad.at(r, c) * local;
          }
        }
      });
}

}  // namespace riskgate::ad
