// Copyright 2026 The Honeypot Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "honeypot/tensor.hpp"

namespace honeypot {

template <typename T>
class Graph;

// Handle to a node in a define-by-run graph.
template <typename T>
struct Var {
  Graph<T>* graph = nullptr;
  int id = -1;

  const Tensor<T>& value() const;
  const Shape& shape() const { return value().shape(); }
  bool valid() const { return graph != nullptr && id >= 0; }
};

// Topologically ordered tape of operation records. Rebuilt every step;
// backward() consumes it.
template <typename T>
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, int)>;

  struct Node {
    std::string kind;
    Tensor<T> value;
    Tensor<T> grad;  // empty until something flows into it
    std::vector<int> parents;
    bool requires_grad = false;
    Parameter<T>* param = nullptr;
    BackwardFn backward;
  };

  Graph() = default;
  // With grad disabled, parameters enter as constants and no backward
  // closures are kept (inference).
  explicit Graph(bool grad_enabled) : grad_enabled_(grad_enabled) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var<T> constant(Tensor<T> value);
  Var<T> leaf(Tensor<T> value, bool requires_grad = true);
  // Registers a parameter once per graph; repeated calls return the same node
  // so gradient from every use is summed before it reaches param.grad.
  Var<T> param(Parameter<T>& p);

  // Gradient wrt every requires_grad node; parameter grads are accumulated
  // additively into Parameter::grad.
  void backward(Var<T> loss);

  const Node& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  const Tensor<T>& value(Var<T> v) const { return node(v.id).value; }
  // Empty tensor when no gradient reached the node.
  const Tensor<T>& grad(Var<T> v) const { return node(v.id).grad; }
  std::size_t size() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }
  bool grad_enabled() const { return grad_enabled_; }
  std::size_t last_backward_visits() const { return visits_; }

  // Kernel-author interface.
  Var<T> push(std::string kind, Tensor<T> value, std::vector<int> parents,
              BackwardFn backward);
  bool requires_grad(int id) const { return node(id).requires_grad; }
  Tensor<T>& grad_buffer(int id);
  const Tensor<T>& out_grad(int id) const { return node(id).grad; }

 private:
  std::vector<Node> nodes_;
  std::unordered_map<Parameter<T>*, int> param_ids_;
  bool grad_enabled_ = true;
  bool consumed_ = false;
  std::size_t visits_ = 0;
};

template <typename T>
const Tensor<T>& Var<T>::value() const {
  return graph->value(*this);
}

namespace ops {

// Kernel set. Rank-3 activations are (batch, seq, width); row-wise kernels
// act on the last dimension.

// a[..., K] x b[K, N] -> [..., N]
template <typename T> Var<T> matmul(Var<T> a, Var<T> b);
template <typename T> Var<T> add(Var<T> a, Var<T> b);
template <typename T> Var<T> mul(Var<T> a, Var<T> b);
// Broadcast a [width] vector over every row.
template <typename T> Var<T> add_rowvec(Var<T> a, Var<T> v);
template <typename T> Var<T> mul_rowvec(Var<T> a, Var<T> v);
template <typename T> Var<T> scale(Var<T> a, T alpha);
// alpha * a + beta, elementwise.
template <typename T> Var<T> affine(Var<T> a, T alpha, T beta);
template <typename T> Var<T> exp(Var<T> a);
template <typename T> Var<T> relu(Var<T> a);
// tanh approximation.
template <typename T> Var<T> gelu(Var<T> a);
template <typename T> Var<T> layer_norm(Var<T> a, T eps = T(1e-5));
template <typename T> Var<T> softmax(Var<T> a);
template <typename T> Var<T> log_softmax(Var<T> a);
// ids laid out [batch, seq]; returns [batch, seq, width].
template <typename T>
Var<T> embedding(Var<T> table, std::span<const std::int32_t> ids,
                 std::size_t batch, std::size_t seq);
// Multi-head scaled dot-product attention over [batch, seq, width] inputs.
// Keys at positions >= lengths[b] are masked out.
template <typename T>
Var<T> attention(Var<T> q, Var<T> k, Var<T> v,
                 std::span<const std::size_t> lengths, std::size_t heads);
template <typename T> Var<T> mean_axis(Var<T> a, std::size_t axis);
template <typename T> Var<T> sum(Var<T> a);
template <typename T> Var<T> mean(Var<T> a);
// Concatenate along the last dimension.
template <typename T> Var<T> concat(std::span<const Var<T>> parts);
// [batch, seq, width] -> [batch, width] at one sequence position.
template <typename T> Var<T> select_position(Var<T> a, std::size_t pos);
// [batch, classes] -> [batch], entry labels[b] of row b.
template <typename T> Var<T> pick(Var<T> a, std::span<const int> labels);
// sum_i w_i * v_i / n for a rank-1 v; weights are constants.
template <typename T>
Var<T> weighted_mean(Var<T> v, std::span<const T> weights);
template <typename T> Var<T> reshape(Var<T> a, Shape shape);
// Identity forward, blocks all gradient flow backward.
template <typename T> Var<T> stop_gradient(Var<T> a);

}  // namespace ops
}  // namespace honeypot
