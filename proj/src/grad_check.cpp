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

#include "honeypot/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace honeypot {
namespace {

template <typename T>
T eval_scalar(const ScalarFn<T>& fn, const Tensor<T>& x) {
  Graph<T> g;
  Var<T> out = fn(g, g.leaf(x, false));
  if (out.value().size() != 1) throw ShapeError("grad_check: function output is not scalar");
  return out.value()[0];
}

void update(GradCheckResult& r, double analytic, double numeric, std::size_t idx) {
  const double err = std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic));
  if (err > r.max_rel_error) {
    r.max_rel_error = err;
    r.worst_index = idx;
  }
}

}  // namespace

template <typename T>
GradCheckResult grad_check(const ScalarFn<T>& fn, const Tensor<T>& point, T h) {
  Graph<T> g;
  Var<T> x = g.leaf(point, true);
  Var<T> out = fn(g, x);
  if (out.value().size() != 1) throw ShapeError("grad_check: function output is not scalar");
  g.backward(out);
  const Tensor<T> analytic = g.grad(x).empty() ? Tensor<T>(point.shape()) : g.grad(x);

  GradCheckResult result;
  Tensor<T> probe = point;
  for (std::size_t i = 0; i < point.size(); ++i) {
    probe[i] = point[i] + h;
    const T fp = eval_scalar(fn, probe);
    probe[i] = point[i] - h;
    const T fm = eval_scalar(fn, probe);
    probe[i] = point[i];
    update(result, analytic[i], (static_cast<double>(fp) - fm) / (2.0 * h), i);
  }
  return result;
}

template <typename T>
GradCheckResult grad_check_params(const std::function<Var<T>(Graph<T>&)>& loss,
                                  const std::vector<Parameter<T>*>& params, T h,
                                  std::size_t max_coords_per_param) {
  for (Parameter<T>* p : params) p->zero_grad();
  {
    Graph<T> g;
    Var<T> out = loss(g);
    g.backward(out);
  }
  auto eval = [&] {
    Graph<T> g;
    return static_cast<double>(loss(g).value()[0]);
  };
  GradCheckResult result;
  std::size_t flat = 0;
  for (Parameter<T>* p : params) {
    const std::size_t n = p->value.size();
    const std::size_t stride =
        max_coords_per_param == 0 || n <= max_coords_per_param ? 1 : n / max_coords_per_param;
    for (std::size_t i = 0; i < n; i += stride) {
      const T orig = p->value[i];
      p->value[i] = orig + h;
      const double fp = eval();
      p->value[i] = orig - h;
      const double fm = eval();
      p->value[i] = orig;
      update(result, p->grad[i], (fp - fm) / (2.0 * h), flat + i);
    }
    flat += n;
    p->zero_grad();
  }
  return result;
}

template GradCheckResult grad_check<float>(const ScalarFn<float>&, const Tensor<float>&, float);
template GradCheckResult grad_check<double>(const ScalarFn<double>&, const Tensor<double>&, double);
template GradCheckResult grad_check_params<float>(const std::function<Var<float>(Graph<float>&)>&,
                                                  const std::vector<Parameter<float>*>&, float,
                                                  std::size_t);
template GradCheckResult grad_check_params<double>(const std::function<Var<double>(Graph<double>&)>&,
                                                   const std::vector<Parameter<double>*>&, double,
                                                   std::size_t);

}  // namespace honeypot
