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

#include "vpf/estimators.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "vpf/exactinfo.hpp"

namespace vpf::est {
namespace {

// Short runs: the full-length calibration lives in the acceptance suite.
MineConfig quick(std::size_t iterations = 1500, std::size_t batch = 128) {
  MineConfig c = MineConfig::desk();
  c.iterations = iterations;
  c.batch_size = batch;
  c.window = std::min(c.window, iterations);
  return c;
}

std::pair<Samples, Samples> gaussian_pair(double rho, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> a(n), b(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = rng.normal();
    b[i] = rho * a[i] + std::sqrt(1.0 - rho * rho) * rng.normal();
  }
  return {Samples::from(a, n, 1), Samples::from(b, n, 1)};
}

TEST(MineConfigTest, ValidatesFields) {
  EXPECT_NO_THROW(MineConfig{}.validate());
  EXPECT_NO_THROW(MineConfig::desk().validate());
  MineConfig c;
  c.ema_rate = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = MineConfig{};
  c.window = c.iterations + 1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = MineConfig{};
  c.hidden = {};
  EXPECT_THROW(c.validate(), ConfigError);
  const MineConfig r = mine_config_from_json(MineConfig::desk().to_json());
  EXPECT_EQ(r.to_json(), MineConfig::desk().to_json());
  EXPECT_THROW(mine_config_from_json(json{{"ema_rate", 2.0}}), ConfigError);
}

TEST(MineTest, RejectsBadInputs) {
  const auto [a, b] = gaussian_pair(0.5, 300, 1);
  EXPECT_THROW(mine_estimate(a, b, quick(10, 200), 1), DomainError);
  const Samples shorter = Samples::from(std::vector<double>(299, 0.0), 299, 1);
  EXPECT_THROW(mine_estimate(a, shorter, quick(10, 16), 1), DimensionError);
  EXPECT_THROW(Samples::from({1.0, 2.0}, 3, 1), DimensionError);
  EXPECT_THROW(Samples::one_hot(std::vector<int>{0, 2}, 2), SchemaError);
}

TEST(MineTest, TraceAndTailAverage) {
  const auto [a, b] = gaussian_pair(0.5, 1000, 2);
  MineConfig c = quick(200, 64);
  c.window = 50;
  const MiEstimate e = mine_estimate(a, b, c, 3);
  ASSERT_EQ(e.trace.size(), 200u);
  double tail = 0.0;
  for (std::size_t i = 150; i < 200; ++i) tail += e.trace[i];
  EXPECT_DOUBLE_EQ(e.nats, tail / 50.0);
  EXPECT_DOUBLE_EQ(e.bits(), e.nats / std::log(2.0));
}

TEST(MineTest, DeterministicPerSeed) {
  const auto [a, b] = gaussian_pair(0.5, 1000, 4);
  const MiEstimate x = mine_estimate(a, b, quick(100, 64), 9);
  const MiEstimate y = mine_estimate(a, b, quick(100, 64), 9);
  EXPECT_EQ(x.trace, y.trace);
  const MiEstimate z = mine_estimate(a, b, quick(100, 64), 10);
  EXPECT_NE(x.trace, z.trace);
}

TEST(MineTest, CopiedBinaryVariableGivesLn2) {
  Rng rng(5);
  std::vector<int> bits(10000);
  for (int& v : bits) v = static_cast<int>(rng.below(2));
  const Samples s = Samples::one_hot(bits, 2);
  const MiEstimate e = mine_estimate(s, s, quick(), 6);
  EXPECT_NEAR(e.nats, std::log(2.0), 0.1 * std::log(2.0));
}

TEST(MineTest, GaussianCorrelationShortRun) {
  const auto [a, b] = gaussian_pair(0.9, 20000, 7);
  const double truth = -0.5 * std::log(1.0 - 0.81);
  EXPECT_NEAR(mine_estimate(a, b, quick(), 8).nats, truth, 0.15 * truth);
}

TEST(MineTest, IndependentPairNearZero) {
  const auto [a, b] = gaussian_pair(0.0, 20000, 9);
  const double v = mine_estimate(a, b, quick(), 10).nats;
  EXPECT_GE(v, -0.02);
  EXPECT_LE(v, 0.05);
}

// ---------------------------------------------------------------------------

std::shared_ptr<const data::Schema> four_level_schema() {
  return std::make_shared<const data::Schema>(data::schema_from_json(json::parse(R"({
    "name": "four",
    "features": [{"name": "c", "kind": "categorical", "levels": ["a", "b", "c", "d"]}],
    "sensitive": {"name": "s", "levels": ["0", "1"]},
    "task": {"name": "t", "levels": ["0", "1"]}
  })")));
}

data::Dataset four_level_data(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  data::Dataset d;
  d.schema = four_level_schema();
  d.n = n;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % 4;
    for (std::size_t k = 0; k < 4; ++k) d.x.push_back(k == c ? 1.0 : 0.0);
    d.targets.push_back(static_cast<double>(c));
    d.s.push_back(static_cast<int>(rng.below(2)));
    d.t.push_back(c >= 2 ? 1 : 0);
    d.source_rows.push_back(i);
  }
  return d;
}

void fill(model::ModelGraph& m, const std::string& name, double value) {
  for (double& v : m.parameters().get(name).mutable_values()) v = value;
}

model::ModelConfig small(model::ModelConfig c) {
  c.hidden_width = 8;
  c.representation_dim = 1;
  return c;
}

TEST(BoundReportTest, PriorEncoderHasZeroCompression) {
  model::ModelGraph m(small(model::cpf(2.0)), four_level_schema(), 1);
  fill(m, "encoder.l1.weight", 0.0);
  fill(m, "encoder.l1.bias", 0.0);
  fill(m, "encoder.log_sigma", 0.0);
  dist::NoiseSource noise(2);
  const BoundReport r = bound_report(m, four_level_data(40, 3), noise);
  EXPECT_DOUBLE_EQ(r.ixy_upper, 0.0);
  EXPECT_TRUE(r.neg_h_x_given_sy.has_value());
  EXPECT_FALSE(r.ity_given_s_lower_offset.has_value());
}

TEST(BoundReportTest, PerfectDecoderReachesZero) {
  // Every row has level "a"; the decoder puts all mass on it.
  data::Dataset d = four_level_data(40, 4);
  for (std::size_t i = 0; i < d.n; ++i) {
    for (std::size_t k = 0; k < 4; ++k) d.x[i * 4 + k] = k == 0 ? 1.0 : 0.0;
    d.targets[i] = 0.0;
  }
  model::ModelGraph m(small(model::cpf(2.0)), four_level_schema(), 1);
  fill(m, "decoder.l1.weight", 0.0);
  auto bias = m.parameters().get("decoder.l1.bias").mutable_values();
  bias[0] = 800.0;
  bias[1] = bias[2] = bias[3] = 0.0;
  dist::NoiseSource noise(5);
  const BoundReport r = bound_report(m, d, noise);
  ASSERT_TRUE(r.neg_h_x_given_sy.has_value());
  EXPECT_EQ(*r.neg_h_x_given_sy, 0.0);
}

TEST(BoundReportTest, PredictionModelsReportTheTaskTerm) {
  model::ModelGraph m(small(model::cfb(2.0)), four_level_schema(), 1);
  dist::NoiseSource noise(6);
  const BoundReport r = bound_report(m, four_level_data(40, 7), noise);
  EXPECT_FALSE(r.neg_h_x_given_sy.has_value());
  ASSERT_TRUE(r.ity_given_s_lower_offset.has_value());
  EXPECT_LE(*r.ity_given_s_lower_offset, 0.0);
  EXPECT_GT(r.ixy_upper, 0.0);
  EXPECT_TRUE(r.to_json()["neg_h_x_given_sy"].is_null());
}

TEST(BoundReportTest, DeterministicGivenNoiseSeed) {
  model::ModelGraph m(small(model::cpf(2.0)), four_level_schema(), 1);
  const data::Dataset d = four_level_data(50, 8);
  dist::NoiseSource n1(9), n2(9);
  EXPECT_EQ(bound_report(m, d, n1, 7).to_json(), bound_report(m, d, n2, 7).to_json());
}

TEST(BoundReportTest, SchemaMismatchRejected) {
  model::ModelGraph m(small(model::cpf(2.0)), four_level_schema(), 1);
  data::Dataset d = data::synth_colored(10, 1);
  dist::NoiseSource noise(1);
  EXPECT_THROW(bound_report(m, d, noise), SchemaError);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Quantizing Y into 16 bins can only lose information, so the exact
// I(X; Y_bin) of the discretized encoder lower-bounds I(X;Y), which the
// average KL upper-bounds.
TEST(BoundReportTest, UpperBoundsQuantizedOracle) {
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    model::ModelGraph m(small(model::cpf(2.0)), four_level_schema(), seed);
    // Spread the means so the quantized information is far from zero.
    for (double& w : m.parameters().get("encoder.l1.weight").mutable_values()) w *= 4.0;
    const data::Dataset d = four_level_data(400, seed);
    dist::NoiseSource noise(seed);
    const BoundReport r = bound_report(m, d, noise);

    std::vector<std::size_t> rows{0, 1, 2, 3};
    const data::Batch b = data::make_batch(d, rows);
    const dist::GaussianHead head = m.encode(b.x, b.s_onehot);
    const double sigma = std::exp(head.clamped_log_sigma().item());
    const auto mu = head.mu.values();
    const double lo = *std::min_element(mu.begin(), mu.end()) - 4 * sigma;
    const double hi = *std::max_element(mu.begin(), mu.end()) + 4 * sigma;
    const std::size_t bins = 16;
    std::vector<double> table;
    for (std::size_t c = 0; c < 4; ++c) {
      double prev = 0.0;
      for (std::size_t k = 0; k < bins; ++k) {
        const double edge = lo + (hi - lo) * static_cast<double>(k + 1) / bins;
        const double cdf = k + 1 == bins ? 1.0 : normal_cdf((edge - mu[c]) / sigma);
        table.push_back(cdf - prev);
        prev = cdf;
      }
    }
    const info::DiscreteJoint px({"X"}, {4}, {0.25, 0.25, 0.25, 0.25});
    const info::DiscreteJoint pxy = info::apply_channel(px, info::Channel(4, bins, table));
    const double exact = info::mutual_info(pxy, {"X"}, {"Y"});
    EXPECT_GT(exact, 0.1);
    EXPECT_GE(r.ixy_upper, exact - 1e-12) << "seed " << seed;
  }
}

}  // namespace
}  // namespace vpf::est
