// Copyright 2026 The vpf Authors
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

// Central finite differences, used as the independent oracle for
// reverse-mode gradients.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "vpf/autodiff.hpp"

namespace vpf::testing {

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

// |a - b| / max(|a|, |b|, floor). The floor keeps near-zero gradients from
// turning roundoff into a large relative error.
inline double rel_error(double a, double b, double floor = 1e-3) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// `loss` builds the scalar loss from the leaves. Leaves are perturbed in
// place with step `h` and restored.
inline GradCheck check_gradients(
    std::vector<ad::Tensor>& leaves,
    const std::function<ad::Tensor(const std::vector<ad::Tensor>&)>& loss,
    double h = 1e-5) {
  ad::Gradients grads;
  {
    ad::Tape tape;
    ad::Tensor l = loss(leaves);
    grads = tape.backward(l);
  }
  GradCheck out;
  for (auto& leaf : leaves) {
    if (!leaf.requires_grad()) continue;
    auto values = leaf.mutable_values();
    std::vector<double> analytic(leaf.numel(), 0.0);
    if (grads.contains(leaf)) {
      auto g = grads.of(leaf);
      analytic.assign(g.begin(), g.end());
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + h;
      const double up = loss(leaves).item();
      values[i] = saved - h;
      const double down = loss(leaves).item();
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      out.max_rel_error = std::max(out.max_rel_error, rel_error(analytic[i], numeric));
      ++out.checked;
    }
  }
  return out;
}

}  // namespace vpf::testing
