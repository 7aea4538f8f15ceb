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

// Encoder and decoder densities. All log-densities are in nats.

#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include "vpf/autodiff.hpp"
#include "vpf/error.hpp"
#include "vpf/rng.hpp"

namespace vpf::dist {

inline constexpr double kLogSigmaMin = -7.0;
inline constexpr double kLogSigmaMax = 7.0;
// Continuous decoder features carry a log-variance, i.e. twice the range.
inline constexpr double kLogVarMin = 2.0 * kLogSigmaMin;
inline constexpr double kLogVarMax = 2.0 * kLogSigmaMax;
inline const double kLog2Pi = std::log(2.0 * std::numbers::pi);

// Isotropic Gaussian encoder p(y|x) = N(mu(x), sigma^2 I). The scale is a
// global parameter that does not depend on x.
struct GaussianHead {
  ad::Tensor mu;         // batch x d
  ad::Tensor log_sigma;  // scalar or [d]; clamped before use

  ad::Tensor clamped_log_sigma() const {
    return ad::clamp(log_sigma, kLogSigmaMin, kLogSigmaMax);
  }
  std::size_t batch() const { return mu.rows(); }
  std::size_t dim() const { return mu.cols(); }
};

inline void require_finite(const ad::Tensor& t, const char* what) {
  for (double v : t.values()) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string(what) + ": non-finite value");
    }
  }
}

// KL(N(mu, sigma^2 I) || N(0, I)) per row:
// 0.5 * sum_j (sigma_j^2 + mu_j^2 - 1 - 2 log sigma_j).
inline ad::Tensor gaussian_kl_to_standard(const GaussianHead& head) {
  require_finite(head.mu, "gaussian_kl_to_standard(mu)");
  require_finite(head.log_sigma, "gaussian_kl_to_standard(log_sigma)");
  ad::Tensor ls = head.clamped_log_sigma();
  ad::Tensor per_dim = ad::square(head.mu) + ad::exp(ls * 2.0) - 1.0 - ls * 2.0;
  if (per_dim.shape() != head.mu.shape()) {
    throw DimensionError("gaussian_kl_to_standard: log_sigma shape " +
                         ad::to_string(head.log_sigma.shape()) +
                         " does not match mu " + ad::to_string(head.mu.shape()));
  }
  return ad::sum_last(per_dim) * 0.5;
}

// Seeded standard-normal noise E of the reparametrization y = mu + sigma * E.
class NoiseSource {
 public:
  explicit NoiseSource(std::uint64_t seed = 2020) : rng_(seed) {}

  ad::Tensor standard_normal(ad::Shape shape) {
    std::vector<double> v(ad::numel_of(shape));
    for (double& x : v) x = rng_.normal();
    return ad::Tensor::from(std::move(shape), std::move(v));
  }

 private:
  Rng rng_;
};

inline ad::Tensor reparam_sample(const GaussianHead& head, const ad::Tensor& eps) {
  if (eps.shape() != head.mu.shape()) {
    throw DimensionError("reparam_sample: noise shape " + ad::to_string(eps.shape()) +
                         " does not match mu " + ad::to_string(head.mu.shape()));
  }
  return head.mu + ad::exp(head.clamped_log_sigma()) * eps;
}

inline ad::Tensor reparam_sample(const GaussianHead& head, NoiseSource& noise) {
  return reparam_sample(head, noise.standard_normal(head.mu.shape()));
}

// Layout of a product-of-factors decoder output.
enum class BlockKind { kCategorical, kGaussian, kBernoulli };

struct HeadBlock {
  BlockKind kind;
  std::size_t offset;  // first output column
  std::size_t width;   // K for categorical; number of factors otherwise
  std::size_t target;  // first target column
  std::size_t variance = 0;  // first log-variance slot (Gaussian only)
};

class HeadLayout {
 public:
  void add_categorical(std::size_t k) {
    if (k < 2) throw SchemaError("categorical factor needs K >= 2");
    blocks_.push_back({BlockKind::kCategorical, width_, k, targets_});
    width_ += k;
    targets_ += 1;
  }

  void add_gaussian() {
    if (!blocks_.empty() && blocks_.back().kind == BlockKind::kGaussian) {
      ++blocks_.back().width;
    } else {
      blocks_.push_back({BlockKind::kGaussian, width_, 1, targets_, gaussians_});
    }
    ++width_;
    ++targets_;
    ++gaussians_;
  }

  void add_bernoulli() {
    if (!blocks_.empty() && blocks_.back().kind == BlockKind::kBernoulli) {
      ++blocks_.back().width;
    } else {
      blocks_.push_back({BlockKind::kBernoulli, width_, 1, targets_});
    }
    ++width_;
    ++targets_;
  }

  const std::vector<HeadBlock>& blocks() const { return blocks_; }
  std::size_t output_width() const { return width_; }
  std::size_t target_width() const { return targets_; }
  std::size_t gaussian_count() const { return gaussians_; }

 private:
  std::vector<HeadBlock> blocks_;
  std::size_t width_ = 0;
  std::size_t targets_ = 0;
  std::size_t gaussians_ = 0;
};

// Decoder q(target | input): raw network outputs (logits for categorical and
// Bernoulli factors, means for Gaussian ones) plus the global log-variances.
struct DecoderHead {
  ad::Tensor outputs;       // batch x layout.output_width()
  ad::Tensor log_variance;  // [layout.gaussian_count()], undefined if none
  const HeadLayout* layout = nullptr;
};

// Negative log-likelihood per row. `targets` is batch x target_width():
// class indices for categorical factors, reals for Gaussian ones and values
// in [0, 1] for Bernoulli ones.
inline ad::Tensor nll(const DecoderHead& head, const ad::Tensor& targets) {
  const HeadLayout& layout = *head.layout;
  const std::size_t batch = head.outputs.rows();
  if (head.outputs.dim() != 2 || head.outputs.cols() != layout.output_width()) {
    throw DimensionError("nll: outputs " + ad::to_string(head.outputs.shape()) +
                         " do not match head width " +
                         std::to_string(layout.output_width()));
  }
  if (targets.dim() != 2 || targets.rows() != batch ||
      targets.cols() != layout.target_width()) {
    throw SchemaError("nll: targets " + ad::to_string(targets.shape()) +
                      " do not conform to the head layout");
  }
  const std::size_t tw = layout.target_width();
  auto tv = targets.values();
  ad::Tensor total;
  auto accumulate = [&](const ad::Tensor& per_row) {
    total = total.defined() ? total + per_row : per_row;
  };
  for (const HeadBlock& b : layout.blocks()) {
    ad::Tensor out = ad::slice_last(head.outputs, b.offset, b.offset + b.width);
    switch (b.kind) {
      case BlockKind::kCategorical: {
        std::vector<double> onehot(batch * b.width, 0.0);
        for (std::size_t r = 0; r < batch; ++r) {
          const double code = tv[r * tw + b.target];
          if (!(code >= 0.0) || code != std::floor(code) ||
              code >= static_cast<double>(b.width)) {
            throw SchemaError("nll: categorical target " + std::to_string(code) +
                              " outside [0, " + std::to_string(b.width) + ")");
          }
          onehot[r * b.width + static_cast<std::size_t>(code)] = 1.0;
        }
        ad::Tensor mask = ad::Tensor::from({batch, b.width}, std::move(onehot));
        accumulate(-ad::sum_last(ad::log_softmax(out) * mask));
        break;
      }
      case BlockKind::kGaussian: {
        std::vector<double> x(batch * b.width);
        for (std::size_t r = 0; r < batch; ++r)
          for (std::size_t c = 0; c < b.width; ++c) x[r * b.width + c] = tv[r * tw + b.target + c];
        ad::Tensor xt = ad::Tensor::from({batch, b.width}, std::move(x));
        ad::Tensor lv = ad::clamp(
            ad::slice_last(head.log_variance, b.variance, b.variance + b.width),
            kLogVarMin, kLogVarMax);
        ad::Tensor term = ad::square(xt - out) * ad::exp(-lv) + lv + kLog2Pi;
        accumulate(ad::sum_last(term) * 0.5);
        break;
      }
      case BlockKind::kBernoulli: {
        std::vector<double> x(batch * b.width);
        for (std::size_t r = 0; r < batch; ++r)
          for (std::size_t c = 0; c < b.width; ++c) x[r * b.width + c] = tv[r * tw + b.target + c];
        ad::Tensor xt = ad::Tensor::from({batch, b.width}, std::move(x));
        // -[x log s(z) + (1 - x) log(1 - s(z))] = softplus(z) - x z
        accumulate(ad::sum_last(ad::softplus(out) - xt * out));
        break;
      }
    }
  }
  if (!total.defined()) throw SchemaError("nll: empty head layout");
  return total;
}

}  // namespace vpf::dist
