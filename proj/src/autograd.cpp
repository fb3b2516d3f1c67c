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

#include "honeypot/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "honeypot/kernels.hpp"

namespace honeypot {

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

template <typename T>
Var<T> Graph<T>::push(std::string kind, Tensor<T> value,
                      std::vector<int> parents, BackwardFn backward) {
  if (consumed_) throw Error("graph already consumed by backward()");
  if (!value.all_finite()) {
    throw NumericError("non-finite value produced by kernel '" + kind + "'");
  }
  Node n;
  n.kind = std::move(kind);
  n.value = std::move(value);
  n.parents = std::move(parents);
  for (const int p : n.parents) {
    if (p < 0 || static_cast<std::size_t>(p) >= nodes_.size()) {
      throw Error("parent index out of range in node '" + n.kind + "'");
    }
    n.requires_grad = n.requires_grad || nodes_[static_cast<std::size_t>(p)].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size() - 1)};
}

template <typename T>
Var<T> Graph<T>::constant(Tensor<T> value) {
  return push("constant", std::move(value), {}, nullptr);
}

template <typename T>
Var<T> Graph<T>::leaf(Tensor<T> value, bool requires_grad) {
  Var<T> v = push("leaf", std::move(value), {}, nullptr);
  nodes_.back().requires_grad = requires_grad;
  return v;
}

template <typename T>
Var<T> Graph<T>::param(Parameter<T>& p) {
  if (auto it = param_ids_.find(&p); it != param_ids_.end()) {
    return {this, it->second};
  }
  Var<T> v = leaf(p.value, grad_enabled_);
  nodes_.back().kind = "param:" + p.name;
  nodes_.back().param = &p;
  param_ids_.emplace(&p, v.id);
  return v;
}

template <typename T>
Tensor<T>& Graph<T>::grad_buffer(int id) {
  Node& n = nodes_.at(static_cast<std::size_t>(id));
  if (n.grad.empty()) n.grad = Tensor<T>(n.value.shape());
  return n.grad;
}

template <typename T>
void Graph<T>::backward(Var<T> loss) {
  if (loss.graph != this) throw Error("loss does not belong to this graph");
  if (consumed_) throw Error("graph already consumed by backward()");
  if (value(loss).size() != 1) {
    throw ShapeError("backward() needs a scalar loss, got shape " +
                     shape_string(value(loss).shape()));
  }
  consumed_ = true;
  visits_ = 0;
  if (!nodes_[static_cast<std::size_t>(loss.id)].requires_grad) return;
  grad_buffer(loss.id)[0] = T{1};
  const auto& K = kernels::active<T>();
  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.requires_grad || n.grad.empty()) continue;
    if (n.backward) {
      ++visits_;
      n.backward(*this, id);
    }
    if (n.param != nullptr) {
      K.axpy(T{1}, n.grad.data(), n.param->grad.data(), n.grad.size());
    }
  }
}

namespace ops {
namespace {

template <typename T>
void require_same_graph(Var<T> a, Var<T> b) {
  if (a.graph != b.graph || a.graph == nullptr) {
    throw Error("operands belong to different graphs");
  }
}

template <typename T>
void require_same_shape(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " +
                     shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
}

// Elementwise unary op with derivative expressed through (input, output).
template <typename T, typename F, typename D>
Var<T> unary(const char* kind, Var<T> a, F f, D dfdx) {
  const Tensor<T>& x = a.value();
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  return a.graph->push(kind, std::move(y), {a.id},
                       [dfdx](Graph<T>& g, int self) {
                         const auto& node = g.node(self);
                         const int pid = node.parents[0];
                         const Tensor<T>& x = g.node(pid).value;
                         const Tensor<T>& dy = node.grad;
                         Tensor<T>& dx = g.grad_buffer(pid);
                         for (std::size_t i = 0; i < x.size(); ++i) {
                           dx[i] += dy[i] * dfdx(x[i], node.value[i]);
                         }
                       });
}

}  // namespace

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
  require_same_graph(a, b);
  const Tensor<T>& A = a.value();
  const Tensor<T>& B = b.value();
  if (B.rank() != 2 || A.rank() < 1 || A.cols() != B.dim(0)) {
    throw ShapeError("matmul: cannot multiply " + shape_string(A.shape()) +
                     " by " + shape_string(B.shape()));
  }
  const std::size_t m = A.rows(), k = A.cols(), n = B.dim(1);
  Shape out_shape = A.shape();
  out_shape.back() = n;
  Tensor<T> C(out_shape);
  kernels::active<T>().gemm_nn(m, n, k, A.data(), B.data(), C.data());
  return a.graph->push(
      "matmul", std::move(C), {a.id, b.id}, [m, n, k](Graph<T>& g, int self) {
        const auto& K = kernels::active<T>();
        const auto& node = g.node(self);
        const int ia = node.parents[0], ib = node.parents[1];
        const Tensor<T>& dC = node.grad;
        if (g.requires_grad(ia)) {
          // dA[m,k] += dC[m,n] * B[k,n]^T
          K.gemm_nt(m, k, n, dC.data(), g.node(ib).value.data(),
                    g.grad_buffer(ia).data());
        }
        if (g.requires_grad(ib)) {
          // dB[k,n] += A[m,k]^T * dC[m,n]
          K.gemm_tn(k, n, m, g.node(ia).value.data(), dC.data(),
                    g.grad_buffer(ib).data());
        }
      });
}

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  require_same_graph(a, b);
  require_same_shape("add", a.value(), b.value());
  Tensor<T> out(a.value().shape());
  kernels::active<T>().add(a.value().data(), b.value().data(), out.data(),
                           out.size());
  return a.graph->push("add", std::move(out), {a.id, b.id},
                       [](Graph<T>& g, int self) {
                         const auto& K = kernels::active<T>();
                         const auto& node = g.node(self);
                         for (const int p : node.parents) {
                           if (!g.requires_grad(p)) continue;
                           K.axpy(T{1}, node.grad.data(), g.grad_buffer(p).data(),
                                  node.grad.size());
                         }
                       });
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  require_same_graph(a, b);
  require_same_shape("mul", a.value(), b.value());
  Tensor<T> out(a.value().shape());
  kernels::active<T>().mul(a.value().data(), b.value().data(), out.data(),
                           out.size());
  return a.graph->push("mul", std::move(out), {a.id, b.id},
                       [](Graph<T>& g, int self) {
                         const auto& node = g.node(self);
                         const int ia = node.parents[0], ib = node.parents[1];
                         const Tensor<T>& dy = node.grad;
                         // Read both inputs before touching grads: ia may equal ib.
                         const Tensor<T>& A = g.node(ia).value;
                         const Tensor<T>& B = g.node(ib).value;
                         if (g.requires_grad(ia)) {
                           Tensor<T>& da = g.grad_buffer(ia);
                           for (std::size_t i = 0; i < dy.size(); ++i) da[i] += dy[i] * B[i];
                         }
                         if (g.requires_grad(ib)) {
                           Tensor<T>& db = g.grad_buffer(ib);
                           for (std::size_t i = 0; i < dy.size(); ++i) db[i] += dy[i] * A[i];
                         }
                       });
}

template <typename T>
Var<T> add_rowvec(Var<T> a, Var<T> v) {
  require_same_graph(a, v);
  const Tensor<T>& A = a.value();
  const Tensor<T>& V = v.value();
  if (V.size() != A.cols()) {
    throw ShapeError("add_rowvec: vector " + shape_string(V.shape()) +
                     " does not match rows of " + shape_string(A.shape()));
  }
  const auto& K = kernels::active<T>();
  Tensor<T> out(A.shape());
  const std::size_t w = A.cols();
  for (std::size_t r = 0; r < A.rows(); ++r) {
    K.add(A.data() + r * w, V.data(), out.data() + r * w, w);
  }
  return a.graph->push("add_rowvec", std::move(out), {a.id, v.id},
                       [w](Graph<T>& g, int self) {
                         const auto& K = kernels::active<T>();
                         const auto& node = g.node(self);
                         const int ia = node.parents[0], iv = node.parents[1];
                         const Tensor<T>& dy = node.grad;
                         if (g.requires_grad(ia)) {
                           K.axpy(T{1}, dy.data(), g.grad_buffer(ia).data(), dy.size());
                         }
                         if (g.requires_grad(iv)) {
                           Tensor<T>& dv = g.grad_buffer(iv);
                           for (std::size_t r = 0; r < dy.rows(); ++r) {
                             K.axpy(T{1}, dy.data() + r * w, dv.data(), w);
                           }
                         }
                       });
}

template <typename T>
Var<T> mul_rowvec(Var<T> a, Var<T> v) {
  require_same_graph(a, v);
  const Tensor<T>& A = a.value();
  const Tensor<T>& V = v.value();
  if (V.size() != A.cols()) {
    throw ShapeError("mul_rowvec: vector " + shape_string(V.shape()) +
                     " does not match rows of " + shape_string(A.shape()));
  }
  const auto& K = kernels::active<T>();
  Tensor<T> out(A.shape());
  const std::size_t w = A.cols();
  for (std::size_t r = 0; r < A.rows(); ++r) {
    K.mul(A.data() + r * w, V.data(), out.data() + r * w, w);
  }
  return a.graph->push(
      "mul_rowvec", std::move(out), {a.id, v.id}, [w](Graph<T>& g, int self) {
        const auto& K = kernels::active<T>();
        const auto& node = g.node(self);
        const int ia = node.parents[0], iv = node.parents[1];
        const Tensor<T>& dy = node.grad;
        const Tensor<T>& A = g.node(ia).value;
        const Tensor<T>& V = g.node(iv).value;
        if (g.requires_grad(ia)) {
          Tensor<T>& da = g.grad_buffer(ia);
          for (std::size_t r = 0; r < dy.rows(); ++r) {
            for (std::size_t c = 0; c < w; ++c) da[r * w + c] += dy[r * w + c] * V[c];
          }
        }
        if (g.requires_grad(iv)) {
          Tensor<T> prod(Shape{w});
          Tensor<T>& dv = g.grad_buffer(iv);
          for (std::size_t r = 0; r < dy.rows(); ++r) {
            K.mul(dy.data() + r * w, A.data() + r * w, prod.data(), w);
            K.axpy(T{1}, prod.data(), dv.data(), w);
          }
        }
      });
}

template <typename T>
Var<T> scale(Var<T> a, T alpha) {
  Tensor<T> out(a.value().shape());
  kernels::active<T>().scale(alpha, a.value().data(), out.data(), out.size());
  return a.graph->push("scale", std::move(out), {a.id},
                       [alpha](Graph<T>& g, int self) {
                         const auto& node = g.node(self);
                         kernels::active<T>().axpy(alpha, node.grad.data(),
                                                   g.grad_buffer(node.parents[0]).data(),
                                                   node.grad.size());
                       });
}

template <typename T>
Var<T> affine(Var<T> a, T alpha, T beta) {
  return unary<T>(
      "affine", a, [alpha, beta](T x) { return alpha * x + beta; },
      [alpha](T, T) { return alpha; });
}

template <typename T>
Var<T> exp(Var<T> a) {
  return unary<T>(
      "exp", a, [](T x) { return std::exp(x); }, [](T, T y) { return y; });
}

template <typename T>
Var<T> relu(Var<T> a) {
  return unary<T>(
      "relu", a, [](T x) { return x > T{0} ? x : T{0}; },
      [](T x, T) { return x > T{0} ? T{1} : T{0}; });
}

template <typename T>
Var<T> gelu(Var<T> a) {
  constexpr T kC = T(0.7978845608028654);  // sqrt(2/pi)
  constexpr T kA = T(0.044715);
  return unary<T>(
      "gelu", a,
      [](T x) {
        return T(0.5) * x * (T{1} + std::tanh(kC * (x + kA * x * x * x)));
      },
      [](T x, T) {
        const T u = kC * (x + kA * x * x * x);
        const T t = std::tanh(u);
        const T du = kC * (T{1} + T{3} * kA * x * x);
        return T(0.5) * (T{1} + t) + T(0.5) * x * (T{1} - t * t) * du;
      });
}

template <typename T>
Var<T> layer_norm(Var<T> a, T eps) {
  const Tensor<T>& X = a.value();
  const std::size_t w = X.cols(), rows = X.rows();
  if (w == 0) throw ShapeError("layer_norm: zero-width rows");
  Tensor<T> out(X.shape());
  std::vector<T> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* x = X.data() + r * w;
    T mu = 0;
    for (std::size_t c = 0; c < w; ++c) mu += x[c];
    mu /= static_cast<T>(w);
    T var = 0;
    for (std::size_t c = 0; c < w; ++c) var += (x[c] - mu) * (x[c] - mu);
    var /= static_cast<T>(w);
    const T is = T{1} / std::sqrt(var + eps);
    inv_std[r] = is;
    for (std::size_t c = 0; c < w; ++c) out[r * w + c] = (x[c] - mu) * is;
  }
  return a.graph->push(
      "layer_norm", std::move(out), {a.id},
      [w, rows, inv_std = std::move(inv_std)](Graph<T>& g, int self) {
        const auto& node = g.node(self);
        const Tensor<T>& xhat = node.value;
        const Tensor<T>& dy = node.grad;
        Tensor<T>& dx = g.grad_buffer(node.parents[0]);
        const T inv_w = T{1} / static_cast<T>(w);
        for (std::size_t r = 0; r < rows; ++r) {
          const T* xh = xhat.data() + r * w;
          const T* d = dy.data() + r * w;
          T sum_d = 0, sum_dx = 0;
          for (std::size_t c = 0; c < w; ++c) {
            sum_d += d[c];
            sum_dx += d[c] * xh[c];
          }
          for (std::size_t c = 0; c < w; ++c) {
            dx[r * w + c] +=
                inv_std[r] * (d[c] - inv_w * sum_d - xh[c] * inv_w * sum_dx);
          }
        }
      });
}

template <typename T>
Var<T> softmax(Var<T> a) {
  const Tensor<T>& X = a.value();
  const std::size_t w = X.cols();
  Tensor<T> out(X.shape());
  for (std::size_t r = 0; r < X.rows(); ++r) {
    const T* x = X.data() + r * w;
    T* y = out.data() + r * w;
    const T mx = *std::max_element(x, x + w);
    T z = 0;
    for (std::size_t c = 0; c < w; ++c) z += (y[c] = std::exp(x[c] - mx));
    for (std::size_t c = 0; c < w; ++c) y[c] /= z;
  }
  return a.graph->push("softmax", std::move(out), {a.id},
                       [w](Graph<T>& g, int self) {
                         const auto& K = kernels::active<T>();
                         const auto& node = g.node(self);
                         const Tensor<T>& y = node.value;
                         const Tensor<T>& dy = node.grad;
                         Tensor<T>& dx = g.grad_buffer(node.parents[0]);
                         for (std::size_t r = 0; r < y.rows(); ++r) {
                           const T s = K.dot(dy.data() + r * w, y.data() + r * w, w);
                           for (std::size_t c = 0; c < w; ++c) {
                             dx[r * w + c] += y[r * w + c] * (dy[r * w + c] - s);
                           }
                         }
                       });
}

template <typename T>
Var<T> log_softmax(Var<T> a) {
  const Tensor<T>& X = a.value();
  const std::size_t w = X.cols();
  Tensor<T> out(X.shape());
  for (std::size_t r = 0; r < X.rows(); ++r) {
    const T* x = X.data() + r * w;
    const T mx = *std::max_element(x, x + w);
    T z = 0;
    for (std::size_t c = 0; c < w; ++c) z += std::exp(x[c] - mx);
    const T lse = mx + std::log(z);
    for (std::size_t c = 0; c < w; ++c) out[r * w + c] = x[c] - lse;
  }
  return a.graph->push("log_softmax", std::move(out), {a.id},
                       [w](Graph<T>& g, int self) {
                         const auto& node = g.node(self);
                         const Tensor<T>& y = node.value;
                         const Tensor<T>& dy = node.grad;
                         Tensor<T>& dx = g.grad_buffer(node.parents[0]);
                         for (std::size_t r = 0; r < y.rows(); ++r) {
                           T s = 0;
                           for (std::size_t c = 0; c < w; ++c) s += dy[r * w + c];
                           for (std::size_t c = 0; c < w; ++c) {
                             dx[r * w + c] += dy[r * w + c] - std::exp(y[r * w + c]) * s;
                           }
                         }
                       });
}

template <typename T>
Var<T> embedding(Var<T> table, std::span<const std::int32_t> ids,
                 std::size_t batch, std::size_t seq) {
  const Tensor<T>& E = table.value();
  if (E.rank() != 2) throw ShapeError("embedding: table must be rank 2");
  if (ids.size() != batch * seq) {
    throw ShapeError("embedding: id count does not match batch x seq");
  }
  const std::size_t w = E.dim(1);
  Tensor<T> out(Shape{batch, seq, w});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= E.dim(0)) {
      throw ShapeError("embedding: id " + std::to_string(ids[i]) +
                       " outside table of " + std::to_string(E.dim(0)));
    }
    std::copy_n(E.data() + static_cast<std::size_t>(ids[i]) * w, w,
                out.data() + i * w);
  }
  std::vector<std::int32_t> saved(ids.begin(), ids.end());
  return table.graph->push(
      "embedding", std::move(out), {table.id},
      [w, saved = std::move(saved)](Graph<T>& g, int self) {
        const auto& K = kernels::active<T>();
        const auto& node = g.node(self);
        Tensor<T>& dE = g.grad_buffer(node.parents[0]);
        for (std::size_t i = 0; i < saved.size(); ++i) {
          K.axpy(T{1}, node.grad.data() + i * w,
                 dE.data() + static_cast<std::size_t>(saved[i]) * w, w);
        }
      });
}

template <typename T>
Var<T> attention(Var<T> q, Var<T> k, Var<T> v,
                 std::span<const std::size_t> lengths, std::size_t heads) {
  require_same_graph(q, k);
  require_same_graph(q, v);
  const Tensor<T>& Q = q.value();
  const Tensor<T>& Km = k.value();
  const Tensor<T>& V = v.value();
  require_same_shape("attention", Q, Km);
  require_same_shape("attention", Q, V);
  if (Q.rank() != 3) throw ShapeError("attention: inputs must be rank 3");
  const std::size_t B = Q.dim(0), S = Q.dim(1), D = Q.dim(2);
  if (heads == 0 || D % heads != 0) {
    throw ShapeError("attention: width not divisible by head count");
  }
  if (lengths.size() != B) throw ShapeError("attention: one length per batch row");
  const std::size_t dh = D / heads;
  const T inv_sqrt = T{1} / std::sqrt(static_cast<T>(dh));
  const auto& K = kernels::active<T>();

  // probs[b][h][i][j]
  Tensor<T> probs(Shape{B, heads, S, S});
  Tensor<T> out(Q.shape());
  std::vector<std::size_t> lens(lengths.begin(), lengths.end());
  for (std::size_t b = 0; b < B; ++b) {
    const std::size_t len = std::min(std::max<std::size_t>(lens[b], 1), S);
    lens[b] = len;
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t off = h * dh;
      for (std::size_t i = 0; i < S; ++i) {
        T* p = probs.data() + ((b * heads + h) * S + i) * S;
        const T* qi = Q.data() + (b * S + i) * D + off;
        T mx = -std::numeric_limits<T>::infinity();
        for (std::size_t j = 0; j < len; ++j) {
          p[j] = K.dot(qi, Km.data() + (b * S + j) * D + off, dh) * inv_sqrt;
          mx = std::max(mx, p[j]);
        }
        T z = 0;
        for (std::size_t j = 0; j < len; ++j) z += (p[j] = std::exp(p[j] - mx));
        T* oi = out.data() + (b * S + i) * D + off;
        for (std::size_t j = 0; j < len; ++j) {
          p[j] /= z;
          K.axpy(p[j], V.data() + (b * S + j) * D + off, oi, dh);
        }
      }
    }
  }
  return q.graph->push(
      "attention", std::move(out), {q.id, k.id, v.id},
      [B, S, D, dh, heads, inv_sqrt, lens = std::move(lens),
       probs = std::move(probs)](Graph<T>& g, int self) {
        const auto& K = kernels::active<T>();
        const auto& node = g.node(self);
        const int iq = node.parents[0], ik = node.parents[1], iv = node.parents[2];
        const Tensor<T>& Q = g.node(iq).value;
        const Tensor<T>& Km = g.node(ik).value;
        const Tensor<T>& V = g.node(iv).value;
        const Tensor<T>& dO = node.grad;
        // Separate scratch so q/k/v sharing one parent still accumulates right.
        Tensor<T> dQ(Q.shape()), dK(Q.shape()), dV(Q.shape());
        std::vector<T> dp(S);
        for (std::size_t b = 0; b < B; ++b) {
          const std::size_t len = lens[b];
          for (std::size_t h = 0; h < heads; ++h) {
            const std::size_t off = h * dh;
            for (std::size_t i = 0; i < S; ++i) {
              const T* p = probs.data() + ((b * heads + h) * S + i) * S;
              const T* doi = dO.data() + (b * S + i) * D + off;
              T s = 0;
              for (std::size_t j = 0; j < len; ++j) {
                dp[j] = K.dot(doi, V.data() + (b * S + j) * D + off, dh);
                s += p[j] * dp[j];
                K.axpy(p[j], doi, dV.data() + (b * S + j) * D + off, dh);
              }
              const T* qi = Q.data() + (b * S + i) * D + off;
              T* dqi = dQ.data() + (b * S + i) * D + off;
              for (std::size_t j = 0; j < len; ++j) {
                const T ds = p[j] * (dp[j] - s) * inv_sqrt;
                if (ds == T{0}) continue;
                K.axpy(ds, Km.data() + (b * S + j) * D + off, dqi, dh);
                K.axpy(ds, qi, dK.data() + (b * S + j) * D + off, dh);
              }
            }
          }
        }
        const std::pair<int, const Tensor<T>*> parts[] = {{iq, &dQ}, {ik, &dK}, {iv, &dV}};
        for (const auto& [pid, d] : parts) {
          if (!g.requires_grad(pid)) continue;
          K.axpy(T{1}, d->data(), g.grad_buffer(pid).data(), d->size());
        }
      });
}

template <typename T>
Var<T> mean_axis(Var<T> a, std::size_t axis) {
  const Tensor<T>& X = a.value();
  if (axis >= X.rank()) throw ShapeError("mean_axis: axis out of range");
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= X.dim(i);
  for (std::size_t i = axis + 1; i < X.rank(); ++i) inner *= X.dim(i);
  const std::size_t n = X.dim(axis);
  if (n == 0) throw ShapeError("mean_axis: empty axis");
  Shape out_shape = X.shape();
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  Tensor<T> out(out_shape);
  const T inv = T{1} / static_cast<T>(n);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t i = 0; i < inner; ++i) {
        out[o * inner + i] += X[(o * n + j) * inner + i];
      }
    }
  }
  for (auto& x : out.storage()) x *= inv;
  return a.graph->push("mean_axis", std::move(out), {a.id},
                       [outer, inner, n, inv](Graph<T>& g, int self) {
                         const auto& node = g.node(self);
                         Tensor<T>& dx = g.grad_buffer(node.parents[0]);
                         for (std::size_t o = 0; o < outer; ++o) {
                           for (std::size_t j = 0; j < n; ++j) {
                             for (std::size_t i = 0; i < inner; ++i) {
                               dx[(o * n + j) * inner + i] += node.grad[o * inner + i] * inv;
                             }
                           }
                         }
                       });
}

template <typename T>
Var<T> sum(Var<T> a) {
  const Tensor<T>& X = a.value();
  const T total = kernels::active<T>().sum(X.data(), X.size());
  return a.graph->push("sum", Tensor<T>::scalar(total), {a.id},
                       [](Graph<T>& g, int self) {
                         const auto& node = g.node(self);
                         Tensor<T>& dx = g.grad_buffer(node.parents[0]);
                         const T d = node.grad[0];
                         for (auto& x : dx.storage()) x += d;
                       });
}

template <typename T>
Var<T> mean(Var<T> a) {
  const Tensor<T>& X = a.value();
  if (X.size() == 0) throw ShapeError("mean: empty tensor");
  T total = 0;
  for (const T x : X.values()) total += x;
  const T inv = T{1} / static_cast<T>(X.size());
  return a.graph->push("mean", Tensor<T>::scalar(total * inv), {a.id},
                       [inv](Graph<T>& g, int self) {
                         const auto& node = g.node(self);
                         Tensor<T>& dx = g.grad_buffer(node.parents[0]);
                         const T d = node.grad[0] * inv;
                         for (auto& x : dx.storage()) x += d;
                       });
}

template <typename T>
Var<T> concat(std::span<const Var<T>> parts) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Tensor<T>& first = parts[0].value();
  const std::size_t rows = first.rows();
  std::vector<std::size_t> widths;
  std::vector<int> ids;
  std::size_t total = 0;
  for (const Var<T>& p : parts) {
    require_same_graph(parts[0], p);
    const Tensor<T>& t = p.value();
    if (t.rank() != first.rank() || t.rows() != rows ||
        !std::equal(t.shape().begin(), t.shape().end() - 1, first.shape().begin())) {
      throw ShapeError("concat: leading dimensions differ");
    }
    widths.push_back(t.cols());
    ids.push_back(p.id);
    total += t.cols();
  }
  Shape out_shape = first.shape();
  out_shape.back() = total;
  Tensor<T> out(out_shape);
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor<T>& t = parts[k].value();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(t.data() + r * widths[k], widths[k], out.data() + r * total + off);
    }
    off += widths[k];
  }
  return parts[0].graph->push(
      "concat", std::move(out), std::move(ids),
      [rows, total, widths = std::move(widths)](Graph<T>& g, int self) {
        const auto& K = kernels::active<T>();
        const auto& node = g.node(self);
        std::size_t off = 0;
        for (std::size_t k = 0; k < widths.size(); ++k) {
          const int pid = node.parents[k];
          if (g.requires_grad(pid)) {
            Tensor<T>& d = g.grad_buffer(pid);
            for (std::size_t r = 0; r < rows; ++r) {
              K.axpy(T{1}, node.grad.data() + r * total + off,
                     d.data() + r * widths[k], widths[k]);
            }
          }
          off += widths[k];
        }
      });
}

template <typename T>
Var<T> select_position(Var<T> a, std::size_t pos) {
  const Tensor<T>& X = a.value();
  if (X.rank() != 3 || pos >= X.dim(1)) {
    throw ShapeError("select_position: need rank 3 input with position in range");
  }
  const std::size_t B = X.dim(0), S = X.dim(1), w = X.dim(2);
  Tensor<T> out(Shape{B, w});
  for (std::size_t b = 0; b < B; ++b) {
    std::copy_n(X.data() + (b * S + pos) * w, w, out.data() + b * w);
  }
  return a.graph->push("select_position", std::move(out), {a.id},
                       [B, S, w, pos](Graph<T>& g, int self) {
                         const auto& K = kernels::active<T>();
                         const auto& node = g.node(self);
                         Tensor<T>& dx = g.grad_buffer(node.parents[0]);
                         for (std::size_t b = 0; b < B; ++b) {
                           K.axpy(T{1}, node.grad.data() + b * w,
                                  dx.data() + (b * S + pos) * w, w);
                         }
                       });
}

template <typename T>
Var<T> pick(Var<T> a, std::span<const int> labels) {
  const Tensor<T>& X = a.value();
  if (X.rank() != 2 || labels.size() != X.dim(0)) {
    throw ShapeError("pick: need [batch, classes] input and one label per row");
  }
  const std::size_t C = X.dim(1);
  Tensor<T> out(Shape{X.dim(0)});
  std::vector<int> saved(labels.begin(), labels.end());
  for (std::size_t b = 0; b < saved.size(); ++b) {
    if (saved[b] < 0 || static_cast<std::size_t>(saved[b]) >= C) {
      throw ShapeError("pick: label " + std::to_string(saved[b]) + " out of range");
    }
    out[b] = X[b * C + static_cast<std::size_t>(saved[b])];
  }
  return a.graph->push("pick", std::move(out), {a.id},
                       [C, saved = std::move(saved)](Graph<T>& g, int self) {
                         const auto& node = g.node(self);
                         Tensor<T>& dx = g.grad_buffer(node.parents[0]);
                         for (std::size_t b = 0; b < saved.size(); ++b) {
                           dx[b * C + static_cast<std::size_t>(saved[b])] += node.grad[b];
                         }
                       });
}

template <typename T>
Var<T> weighted_mean(Var<T> v, std::span<const T> weights) {
  const Tensor<T>& X = v.value();
  if (X.rank() != 1 || weights.size() != X.size() || X.size() == 0) {
    throw ShapeError("weighted_mean: need non-empty rank-1 input and matching weights");
  }
  T total = 0;
  for (std::size_t i = 0; i < X.size(); ++i) total += weights[i] * X[i];
  const T inv = T{1} / static_cast<T>(X.size());
  std::vector<T> saved(weights.begin(), weights.end());
  return v.graph->push("weighted_mean", Tensor<T>::scalar(total * inv), {v.id},
                       [inv, saved = std::move(saved)](Graph<T>& g, int self) {
                         const auto& node = g.node(self);
                         Tensor<T>& dx = g.grad_buffer(node.parents[0]);
                         const T d = node.grad[0] * inv;
                         for (std::size_t i = 0; i < saved.size(); ++i) dx[i] += saved[i] * d;
                       });
}

template <typename T>
Var<T> reshape(Var<T> a, Shape shape) {
  Tensor<T> out = a.value().reshaped(std::move(shape));
  return a.graph->push("reshape", std::move(out), {a.id},
                       [](Graph<T>& g, int self) {
                         const auto& node = g.node(self);
                         kernels::active<T>().axpy(T{1}, node.grad.data(),
                                                   g.grad_buffer(node.parents[0]).data(),
                                                   node.grad.size());
                       });
}

template <typename T>
Var<T> stop_gradient(Var<T> a) {
  // A parentless node: nothing downstream can reach a.
  return a.graph->push("stop_gradient", a.value(), {}, nullptr);
}

#define HONEYPOT_INSTANTIATE_OPS(T)                                            \
  template Var<T> matmul(Var<T>, Var<T>);                                      \
  template Var<T> add(Var<T>, Var<T>);                                         \
  template Var<T> mul(Var<T>, Var<T>);                                         \
  template Var<T> add_rowvec(Var<T>, Var<T>);                                  \
  template Var<T> mul_rowvec(Var<T>, Var<T>);                                  \
  template Var<T> scale(Var<T>, T);                                            \
  template Var<T> affine(Var<T>, T, T);                                        \
  template Var<T> exp(Var<T>);                                                 \
  template Var<T> relu(Var<T>);                                                \
  template Var<T> gelu(Var<T>);                                                \
  template Var<T> layer_norm(Var<T>, T);                                       \
  template Var<T> softmax(Var<T>);                                             \
  template Var<T> log_softmax(Var<T>);                                         \
  template Var<T> embedding(Var<T>, std::span<const std::int32_t>,             \
                            std::size_t, std::size_t);                         \
  template Var<T> attention(Var<T>, Var<T>, Var<T>,                            \
                            std::span<const std::size_t>, std::size_t);        \
  template Var<T> mean_axis(Var<T>, std::size_t);                              \
  template Var<T> sum(Var<T>);                                                 \
  template Var<T> mean(Var<T>);                                                \
  template Var<T> concat(std::span<const Var<T>>);                             \
  template Var<T> select_position(Var<T>, std::size_t);                        \
  template Var<T> pick(Var<T>, std::span<const int>);                          \
  template Var<T> weighted_mean(Var<T>, std::span<const T>);                   \
  template Var<T> reshape(Var<T>, Shape);                                      \
  template Var<T> stop_gradient(Var<T>);

HONEYPOT_INSTANTIATE_OPS(float)
HONEYPOT_INSTANTIATE_OPS(double)

}  // namespace ops

template class Graph<float>;
template class Graph<double>;

}  // namespace honeypot
