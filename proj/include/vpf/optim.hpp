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

// Adam optimizer over a ParameterSet.

#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vpf/autodiff.hpp"
#include "vpf/error.hpp"
#include "vpf/nn.hpp"

namespace vpf::nn {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// First and second moments, one buffer per parameter in registration order.
struct AdamState {
  std::vector<std::vector<double>> m, v;
  std::uint64_t step = 0;

  static AdamState for_parameters(const ParameterSet& params) {
    AdamState s;
    for (const auto& [name, t] : params) {
      s.m.emplace_back(t.numel(), 0.0);
      s.v.emplace_back(t.numel(), 0.0);
    }
    return s;
  }
};

// One bias-corrected Adam update in place. A parameter absent from `grads`
// is treated as having zero gradient (its moments still decay).
inline void adam_step(ParameterSet& params, const ad::Gradients& grads, AdamState& state, double lr,
                      const AdamOptions& opt = {}) {
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw DimensionError("adam_step: optimizer state has " + std::to_string(state.m.size()) + " buffers for " +
                         std::to_string(params.size()) + " parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state.m[i].size() != params[i].numel() || state.v[i].size() != params[i].numel()) {
      throw DimensionError("adam_step: state shape mismatch for parameter '" + params.name(i) + "'");
    }
    if (!grads.contains(params[i])) continue;
    const std::span<const double> g = grads.of(params[i]);
    if (g.size() != params[i].numel()) {
      throw DimensionError("adam_step: gradient shape mismatch for parameter '" + params.name(i) + "'");
    }
    for (double x : g) {
      if (!std::isfinite(x)) throw NumericError("adam_step: non-finite gradient for parameter '" + params.name(i) + "'");
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(opt.beta1, t);
  const double c2 = 1.0 - std::pow(opt.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i].mutable_values();
    auto& m = state.m[i];
    auto& v = state.v[i];
    const bool has = grads.contains(params[i]);
    const std::span<const double> g = has ? grads.of(params[i]) : std::span<const double>();
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double gk = has ? g[k] : 0.0;
      m[k] = opt.beta1 * m[k] + (1.0 - opt.beta1) * gk;
      v[k] = opt.beta2 * v[k] + (1.0 - opt.beta2) * gk * gk;
      w[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + opt.epsilon);
    }
  }
}

}  // namespace vpf::nn
