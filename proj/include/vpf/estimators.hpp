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

// Mutual-information estimation with MINE, and the variational bound terms
// of a trained model evaluated on a dataset.

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "vpf/autodiff.hpp"
#include "vpf/data.hpp"
#include "vpf/distributions.hpp"
#include "vpf/error.hpp"
#include "vpf/nn.hpp"
#include "vpf/objectives.hpp"
#include "vpf/optim.hpp"
#include "vpf/rng.hpp"

namespace vpf::est {

using json = nlohmann::json;

inline constexpr double kNatsPerBit = std::numbers::ln2;

struct MineConfig {
  std::vector<std::size_t> hidden{100, 100};
  std::size_t iterations = 50000;
  double learning_rate = 1e-3;
  std::size_t batch_size = 2048;
  double ema_rate = 0.1;
  std::size_t window = 100;

  static MineConfig paper(std::size_t batch = 2048) {
    MineConfig c;
    c.batch_size = batch;
    return c;
  }

  // Fewer iterations and a smaller batch so one estimate runs in well under
  // a minute on a single core.
  static MineConfig desk() {
    MineConfig c;
    c.iterations = 20000;
    c.batch_size = 128;
    return c;
  }

  void validate() const {
    if (hidden.empty()) throw ConfigError("mine: critic needs at least one hidden layer");
    for (std::size_t h : hidden) {
      if (h == 0) throw ConfigError("mine: hidden width must be positive");
    }
    if (iterations == 0) throw ConfigError("mine: iterations must be positive");
    if (!(learning_rate > 0.0)) throw ConfigError("mine: learning rate must be positive");
    if (batch_size < 2) throw ConfigError("mine: batch size must be at least 2");
    if (!(ema_rate > 0.0 && ema_rate <= 1.0)) throw ConfigError("mine: ema rate must be in (0, 1]");
    if (window == 0 || window > iterations) throw ConfigError("mine: window must be in [1, iterations]");
  }

  json to_json() const {
    return {{"hidden", hidden},         {"iterations", iterations}, {"learning_rate", learning_rate},
            {"batch_size", batch_size}, {"ema_rate", ema_rate},     {"window", window}};
  }
};

inline MineConfig mine_config_from_json(const json& j, MineConfig base = {}) {
  try {
    if (j.contains("hidden")) base.hidden = j.at("hidden").get<std::vector<std::size_t>>();
    if (j.contains("iterations")) base.iterations = j.at("iterations").get<std::size_t>();
    if (j.contains("learning_rate")) base.learning_rate = j.at("learning_rate").get<double>();
    if (j.contains("batch_size")) base.batch_size = j.at("batch_size").get<std::size_t>();
    if (j.contains("ema_rate")) base.ema_rate = j.at("ema_rate").get<double>();
    if (j.contains("window")) base.window = j.at("window").get<std::size_t>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("mine config: ") + e.what());
  }
  base.validate();
  return base;
}

struct MiEstimate {
  double nats = 0.0;
  std::vector<double> trace;  // Donsker-Varadhan bound per iteration, nats

  double bits() const { return nats / kNatsPerBit; }
};

// Row-major sample matrix.
struct Samples {
  std::vector<double> values;
  std::size_t rows = 0;
  std::size_t cols = 0;

  static Samples from(std::vector<double> v, std::size_t rows, std::size_t cols) {
    if (v.size() != rows * cols) throw DimensionError("samples: value count does not match rows x cols");
    return {std::move(v), rows, cols};
  }

  static Samples one_hot(std::span<const int> labels, std::size_t levels) {
    Samples s{std::vector<double>(labels.size() * levels, 0.0), labels.size(), levels};
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= levels) {
        throw SchemaError("samples: label " + std::to_string(labels[i]) + " out of range");
      }
      s.values[i * levels + static_cast<std::size_t>(labels[i])] = 1.0;
    }
    return s;
  }
};

namespace detail {

inline ad::Tensor gather_pairs(const Samples& s, const Samples& y, std::span<const std::size_t> s_rows,
                               std::span<const std::size_t> y_rows) {
  const std::size_t w = s.cols + y.cols;
  std::vector<double> v(s_rows.size() * w);
  for (std::size_t i = 0; i < s_rows.size(); ++i) {
    double* out = v.data() + i * w;
    std::copy_n(s.values.data() + s_rows[i] * s.cols, s.cols, out);
    std::copy_n(y.values.data() + y_rows[i] * y.cols, y.cols, out + s.cols);
  }
  return ad::Tensor::from({s_rows.size(), w}, std::move(v));
}

}  // namespace detail

// Trains a critic T(s, y) to maximize the Donsker-Varadhan bound
//   E_joint[T] - log E_marginal[e^T].
// Marginal pairs come from permuting y within the batch. The partition
// gradient is divided by a moving average of E[e^T] instead of the batch
// value, which removes the minibatch bias of the gradient; the reported
// value is the plain bound on each batch, averaged over the final `window`
// iterations.
inline MiEstimate mine_estimate(const Samples& s, const Samples& y, const MineConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (s.rows != y.rows) {
    throw DimensionError("mine: " + std::to_string(s.rows) + " s samples vs " + std::to_string(y.rows) + " y samples");
  }
  if (s.rows < 2 * cfg.batch_size) {
    throw DomainError("mine: need at least " + std::to_string(2 * cfg.batch_size) + " samples, got " +
                      std::to_string(s.rows));
  }
  Rng rng(seed);
  nn::Mlp critic(s.cols + y.cols, cfg.hidden, 1, nn::Activation::kRelu6, rng);
  nn::ParameterSet params;
  critic.register_into(params, "critic");
  nn::AdamState state = nn::AdamState::for_parameters(params);

  const std::size_t b = cfg.batch_size;
  std::vector<std::size_t> rows(b), shuffled(b);
  std::vector<std::size_t> order(s.rows);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::size_t cursor = order.size();

  MiEstimate out;
  out.trace.reserve(cfg.iterations);
  double ema = 0.0;
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    // Batches walk through a fresh permutation of the data each pass.
    for (std::size_t i = 0; i < b; ++i) {
      if (cursor == order.size()) {
        rng.shuffle(std::span<std::size_t>(order));
        cursor = 0;
      }
      rows[i] = order[cursor++];
    }
    shuffled = rows;
    rng.shuffle(std::span<std::size_t>(shuffled));

    ad::Tape tape;
    const ad::Tensor t_joint = critic(detail::gather_pairs(s, y, rows, rows));
    const ad::Tensor t_marg = critic(detail::gather_pairs(s, y, rows, shuffled));
    const ad::Tensor mean_joint = ad::mean(t_joint);
    const ad::Tensor partition = ad::mean(ad::exp(t_marg));
    const double dv = mean_joint.item() - ad::log_mean_exp(t_marg).item();
    const double z = partition.item();
    if (!std::isfinite(dv) || !std::isfinite(z)) {
      throw NumericError("mine: non-finite objective at iteration " + std::to_string(it));
    }
    ema = it == 0 ? z : (1.0 - cfg.ema_rate) * ema + cfg.ema_rate * z;
    const ad::Tensor loss = partition / ema - mean_joint;
    nn::adam_step(params, tape.backward(loss), state, cfg.learning_rate);
    out.trace.push_back(dv);
  }
  double tail = 0.0;
  for (std::size_t i = cfg.iterations - cfg.window; i < cfg.iterations; ++i) tail += out.trace[i];
  out.nats = tail / static_cast<double>(cfg.window);
  return out;
}

// ---------------------------------------------------------------------------
// Bound terms of a model on a dataset, in nats per sample.

struct BoundReport {
  double ixy_upper = 0.0;                        // mean KL(p(y|x) || N(0, I))
  std::optional<double> neg_h_x_given_sy;        // mean log q(x | s, y), reconstruction models
  std::optional<double> ity_given_s_lower_offset;  // mean log q(t | s, y), prediction models

  json to_json() const {
    json j;
    j["ixy_upper"] = ixy_upper;
    j["neg_h_x_given_sy"] = neg_h_x_given_sy ? json(*neg_h_x_given_sy) : json(nullptr);
    j["ity_given_s_lower_offset"] = ity_given_s_lower_offset ? json(*ity_given_s_lower_offset) : json(nullptr);
    return j;
  }
};

// One reparametrized draw of Y per row; evaluated in chunks without a tape.
inline BoundReport bound_report(const model::ModelGraph& model, const data::Dataset& d, dist::NoiseSource& noise,
                                std::size_t chunk = 4096) {
  if (d.schema->hash() != model.schema().hash()) {
    throw SchemaError("bound_report: dataset schema " + d.schema->name + " does not match the model schema");
  }
  if (d.n == 0) throw ContractError("bound_report: empty dataset");
  const bool predict = model.config().objective == model::Objective::kPrediction;
  if (predict && !d.has_task()) throw SchemaError("bound_report: dataset has no task labels");
  double kl = 0.0, ll = 0.0;
  std::vector<std::size_t> rows;
  for (std::size_t start = 0; start < d.n; start += chunk) {
    const std::size_t end = std::min(d.n, start + chunk);
    rows.resize(end - start);
    for (std::size_t i = start; i < end; ++i) rows[i - start] = i;
    const data::Batch batch = data::make_batch(d, rows);
    const dist::GaussianHead head = model.encode(batch.x, batch.s_onehot);
    const ad::Tensor kl_rows = dist::gaussian_kl_to_standard(head);
    for (double v : kl_rows.values()) kl += v;
    const ad::Tensor y = dist::reparam_sample(head, noise);
    const ad::Tensor nll = dist::nll(model.decode(y, batch.s_onehot), predict ? batch.task : batch.targets);
    for (double v : nll.values()) ll -= v;
  }
  BoundReport r;
  const double n = static_cast<double>(d.n);
  r.ixy_upper = kl / n;
  if (!std::isfinite(r.ixy_upper) || !std::isfinite(ll)) throw NumericError("bound_report: non-finite bound term");
  (predict ? r.ity_given_s_lower_offset : r.neg_h_x_given_sy) = ll / n;
  return r;
}

}  // namespace vpf::est
