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

#include <functional>
#include <vector>

#include "honeypot/autograd.hpp"

namespace honeypot {

// Builds a scalar output from a leaf on a fresh graph.
template <typename T>
using ScalarFn = std::function<Var<T>(Graph<T>&, Var<T>)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
};

// Max over coordinates of |analytic - central difference| / max(1, |analytic|).
template <typename T>
GradCheckResult grad_check(const ScalarFn<T>& fn, const Tensor<T>& point, T h);

// Same comparison over every parameter of a model. `loss` builds the scalar on
// a fresh graph from the current parameter values.
template <typename T>
GradCheckResult grad_check_params(const std::function<Var<T>(Graph<T>&)>& loss,
                                  const std::vector<Parameter<T>*>& params, T h,
                                  std::size_t max_coords_per_param = 0);

}  // namespace honeypot
