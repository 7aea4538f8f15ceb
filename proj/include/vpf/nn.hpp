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

#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "vpf/autodiff.hpp"
#include "vpf/error.hpp"
#include "vpf/rng.hpp"

namespace vpf::nn {

// Named trainable tensors in registration order. The order is part of the
// checkpoint format and of the optimizer state layout.
class ParameterSet {
 public:
  void add(std::string name, ad::Tensor tensor) {
    for (const auto& [n, t] : entries_) {
      if (n == name) throw ContractError("parameter '" + name + "' registered twice");
    }
    entries_.emplace_back(std::move(name), std::move(tensor));
  }

  std::size_t size() const { return entries_.size(); }
  const std::string& name(std::size_t i) const { return entries_[i].first; }
  ad::Tensor& operator[](std::size_t i) { return entries_[i].second; }
  const ad::Tensor& operator[](std::size_t i) const { return entries_[i].second; }

  ad::Tensor& get(const std::string& name) {
    for (auto& [n, t] : entries_) {
      if (n == name) return t;
    }
    throw ContractError("no parameter named '" + name + "'");
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : entries_) n += t.numel();
    return n;
  }

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

 private:
  std::vector<std::pair<std::string, ad::Tensor>> entries_;
};

enum class Activation { kRelu, kRelu6 };

inline ad::Tensor activate(const ad::Tensor& x, Activation act) {
  return act == Activation::kRelu ? ad::relu(x) : ad::relu6(x);
}

// Glorot-uniform weights, zero bias.
struct Linear {
  ad::Tensor weight;  // in x out
  ad::Tensor bias;    // out

  Linear() = default;
  Linear(std::size_t in, std::size_t out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    std::vector<double> w(in * out);
    for (double& v : w) v = rng.uniform(-limit, limit);
    weight = ad::Tensor::parameter({in, out}, std::move(w));
    bias = ad::Tensor::parameter({out}, std::vector<double>(out, 0.0));
  }

  std::size_t in_features() const { return weight.shape()[0]; }
  std::size_t out_features() const { return weight.shape()[1]; }

  ad::Tensor operator()(const ad::Tensor& x) const {
    return ad::matmul(x, weight) + bias;
  }
};

// Fully connected network: hidden layers share one activation, the output
// layer is linear.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out,
      Activation act, Rng& rng)
      : act_(act) {
    std::size_t width = in;
    for (std::size_t h : hidden) {
      layers_.emplace_back(width, h, rng);
      width = h;
    }
    layers_.emplace_back(width, out, rng);
  }

  ad::Tensor operator()(const ad::Tensor& x) const {
    ad::Tensor h = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      h = layers_[i](h);
      if (i + 1 < layers_.size()) h = activate(h, act_);
    }
    return h;
  }

  void register_into(ParameterSet& params, const std::string& prefix) const {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      params.add(prefix + ".l" + std::to_string(i) + ".weight", layers_[i].weight);
      params.add(prefix + ".l" + std::to_string(i) + ".bias", layers_[i].bias);
    }
  }

  std::size_t in_features() const { return layers_.front().in_features(); }
  std::size_t out_features() const { return layers_.back().out_features(); }
  const std::vector<Linear>& layers() const { return layers_; }

 private:
  std::vector<Linear> layers_;
  Activation act_ = Activation::kRelu;
};

}  // namespace vpf::nn
