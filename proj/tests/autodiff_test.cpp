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

#include "vpf/autodiff.hpp"

#include <cmath>
#include <cstring>
#include <vector>

#include <gtest/gtest.h>

#include "fd_check.hpp"
#include "random_graphs.hpp"

namespace vpf::ad {
namespace {

TEST(MatmulTest, IdentityLeavesMatrixUnchanged) {
  Tensor eye = Tensor::matrix({{1, 0}, {0, 1}});
  Tensor m = Tensor::matrix({{1, 2}, {3, 4}});
  Tensor out = matmul(eye, m);
  EXPECT_EQ(out.shape(), (Shape{2, 2}));
  EXPECT_EQ(std::vector<double>(out.values().begin(), out.values().end()),
            (std::vector<double>{1, 2, 3, 4}));
}

TEST(MatmulTest, TwoByTwoProduct) {
  Tensor out = matmul(Tensor::matrix({{1, 2}, {3, 4}}), Tensor::matrix({{5, 6}, {7, 8}}));
  EXPECT_EQ(std::vector<double>(out.values().begin(), out.values().end()),
            (std::vector<double>{19, 22, 43, 50}));
}

TEST(MatmulTest, MismatchedInnerExtentNamesBothShapes) {
  Tensor a = Tensor::zeros({2, 3});
  Tensor b = Tensor::zeros({2, 3});
  try {
    matmul(a, b);
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("[2,3] and [2,3]"), std::string::npos);
  }
}

TEST(MatmulTest, BackwardAccumulatesTransposedProducts) {
  Tensor a = Tensor::matrix({{1, 2}, {3, 4}}, true);
  Tensor b = Tensor::matrix({{5, 6}, {7, 8}}, true);
  Tape tape;
  Gradients g = tape.backward(sum(matmul(a, b)));
  // d/da sum(ab) = 1 * b^T row sums; d/db = a^T * 1.
  auto ga = g.of(a);
  auto gb = g.of(b);
  EXPECT_DOUBLE_EQ(ga[0], 11);
  EXPECT_DOUBLE_EQ(ga[1], 15);
  EXPECT_DOUBLE_EQ(ga[2], 11);
  EXPECT_DOUBLE_EQ(ga[3], 15);
  EXPECT_DOUBLE_EQ(gb[0], 4);
  EXPECT_DOUBLE_EQ(gb[1], 4);
  EXPECT_DOUBLE_EQ(gb[2], 6);
  EXPECT_DOUBLE_EQ(gb[3], 6);
}

TEST(Relu6Test, ClampsAndPassesInteriorGradient) {
  EXPECT_EQ(relu6(Tensor::scalar(7)).item(), 6);
  EXPECT_EQ(relu6(Tensor::scalar(-1)).item(), 0);
  Tensor x = Tensor::scalar(3, true);
  Tape tape;
  Tensor y = relu6(x);
  EXPECT_EQ(y.item(), 3);
  EXPECT_EQ(tape.backward(y).of(x)[0], 1.0);
}

TEST(Relu6Test, ZeroGradientOutsideInterior) {
  Tensor x = Tensor::from({2}, {7, -1}, true);
  Tape tape;
  auto g = tape.backward(sum(relu6(x))).of(x);
  EXPECT_EQ(g[0], 0.0);
  EXPECT_EQ(g[1], 0.0);
}

TEST(LogSoftmaxTest, UniformLogits) {
  Tensor out = log_softmax(Tensor::from({1, 4}, {0.3, 0.3, 0.3, 0.3}));
  for (double v : out.values()) EXPECT_NEAR(v, -std::log(4.0), 1e-15);
}

TEST(LogSoftmaxTest, LargeLogitsDoNotOverflow) {
  Tensor out = log_softmax(Tensor::from({2}, {1000, 0}));
  EXPECT_NEAR(out[0], 0.0, 1e-12);
  EXPECT_NEAR(out[1], -1000.0, 1e-9);
  EXPECT_TRUE(std::isfinite(out[0]) && std::isfinite(out[1]));
}

TEST(LogSoftmaxTest, MatchesDirectEvaluation) {
  // Reference: long double evaluation of x_i - log(sum exp x_j).
  const long double s = std::exp(1.0L) + std::exp(2.0L) + std::exp(3.0L);
  const long double lse = std::log(s);
  Tensor out = log_softmax(Tensor::from({3}, {1, 2, 3}));
  EXPECT_NEAR(out[0], static_cast<double>(1.0L - lse), 1e-14);
  EXPECT_NEAR(out[1], static_cast<double>(2.0L - lse), 1e-14);
  EXPECT_NEAR(out[2], static_cast<double>(3.0L - lse), 1e-14);
}

TEST(LogSoftmaxTest, RowsExponentiateToOne) {
  Rng rng(7);
  std::vector<double> v(5 * 9);
  for (double& x : v) x = rng.uniform(-30, 30);
  Tensor out = log_softmax(Tensor::from({5, 9}, v));
  for (std::size_t r = 0; r < 5; ++r) {
    double s = 0;
    for (std::size_t c = 0; c < 9; ++c) s += std::exp(out.at(r, c));
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(BackwardTest, SquareDerivative) {
  Tensor x = Tensor::scalar(3, true);
  Tape tape;
  EXPECT_DOUBLE_EQ(tape.backward(square(x)).of(x)[0], 6.0);
}

TEST(BackwardTest, SigmoidLayerMatchesFiniteDifferences) {
  Rng rng(11);
  std::vector<double> w(3 * 2), x(4 * 3);
  for (double& v : w) v = rng.uniform(-1, 1);
  for (double& v : x) v = rng.uniform(-1, 1);
  std::vector<Tensor> leaves = {Tensor::parameter({3, 2}, w)};
  Tensor input = Tensor::from({4, 3}, x);
  auto result = testing::check_gradients(leaves, [input](const std::vector<Tensor>& l) {
    return sum(sigmoid(matmul(input, l[0])));
  });
  EXPECT_EQ(result.checked, 6u);
  EXPECT_LE(result.max_rel_error, 1e-4);
}

TEST(BackwardTest, ConstantsAreAbsentFromGradientMap) {
  Tensor w = Tensor::scalar(2, true);
  Tensor c = Tensor::scalar(5);
  Tape tape;
  Gradients g = tape.backward(w * c);
  EXPECT_TRUE(g.contains(w));
  EXPECT_FALSE(g.contains(c));
  EXPECT_EQ(g.size(), 1u);
}

TEST(BackwardTest, NonScalarLossIsRejected) {
  Tensor x = Tensor::from({2}, {1, 2}, true);
  Tape tape;
  EXPECT_THROW(tape.backward(x * 2.0), ContractError);
}

TEST(BackwardTest, LossFromAnotherTapeIsRejected) {
  Tensor x = Tensor::scalar(1, true);
  Tensor y;
  {
    Tape other;
    y = x * 2.0;
  }
  Tape tape;
  EXPECT_THROW(tape.backward(y), TapeError);
  EXPECT_THROW(tape.backward(Tensor::scalar(1.0)), TapeError);
}

TEST(BackwardTest, SecondCallWithoutResetIsRejected) {
  Tensor x = Tensor::scalar(1, true);
  Tape tape;
  Tensor y = square(x);
  tape.backward(y);
  EXPECT_THROW(tape.backward(y), TapeError);
  tape.reset();
  Tensor z = square(x);
  EXPECT_DOUBLE_EQ(tape.backward(z).of(x)[0], 2.0);
}

TEST(BackwardTest, SharedSubexpressionAccumulates) {
  Tensor x = Tensor::scalar(2, true);
  Tape tape;
  Tensor h = x * 3.0;
  EXPECT_DOUBLE_EQ(tape.backward(h * h).of(x)[0], 2 * 6 * 3);
}

TEST(BroadcastTest, RowVectorBiasGradientSumsOverRows) {
  Tensor m = Tensor::from({3, 2}, {1, 2, 3, 4, 5, 6});
  Tensor b = Tensor::from({2}, {10, 20}, true);
  Tape tape;
  Tensor y = m + b;
  EXPECT_EQ(y.at(2, 1), 26);
  auto g = tape.backward(sum(y)).of(b);
  EXPECT_EQ(g[0], 3);
  EXPECT_EQ(g[1], 3);
}

TEST(BroadcastTest, IncompatibleShapesThrow) {
  EXPECT_THROW(add(Tensor::zeros({3, 2}), Tensor::zeros({3})), DimensionError);
  EXPECT_THROW(concat_last(Tensor::zeros({3, 2}), Tensor::zeros({2, 2})), DimensionError);
  EXPECT_THROW(slice_last(Tensor::zeros({3, 2}), 1, 3), DimensionError);
  EXPECT_THROW(Tensor::from({2, 2}, {1, 2, 3}), DimensionError);
}

TEST(OpsTest, ReductionsAndLayout) {
  Tensor m = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(sum(m).item(), 21);
  EXPECT_EQ(mean(m).item(), 3.5);
  Tensor rs = sum_last(m);
  EXPECT_EQ(rs.shape(), (Shape{2}));
  EXPECT_EQ(rs[1], 15);
  Tensor c = concat_last(m, Tensor::from({2, 1}, {7, 8}));
  EXPECT_EQ(c.at(1, 3), 8);
  EXPECT_EQ(slice_last(c, 1, 3).at(1, 0), 5);
  const std::size_t rows[] = {1, 1, 0};
  EXPECT_EQ(take_rows(m, rows).at(2, 2), 3);
  EXPECT_NEAR(log_mean_exp(Tensor::from({2}, {0, std::log(3.0)})).item(), std::log(2.0), 1e-15);
}

// Every primitive individually against finite differences.
TEST(GradientPropertyTest, EachPrimitiveMatchesFiniteDifferences) {
  using L = const std::vector<Tensor>&;
  const std::vector<std::pair<const char*, testing::Expr>> cases = {
      {"add", [](L l) { return sum((l[0] + l[1]) * l[0]); }},
      {"sub", [](L l) { return sum(square(l[0] - l[1])); }},
      {"mul", [](L l) { return sum(l[0] * l[1]); }},
      {"div", [](L l) { return sum(l[0] / (square(l[1]) + 1.0)); }},
      {"exp", [](L l) { return sum(exp(l[0])); }},
      {"log", [](L l) { return sum(log(square(l[0]) + 0.1)); }},
      {"square", [](L l) { return sum(square(l[0])); }},
      {"mean", [](L l) { return mean(l[0] * l[1]); }},
      {"sum_last", [](L l) { return sum(square(sum_last(l[0]))); }},
      {"concat", [](L l) { return sum(square(concat_last(l[0], l[1]))); }},
      {"slice", [](L l) { return sum(square(slice_last(l[0], 1, 3))); }},
      {"sigmoid", [](L l) { return sum(sigmoid(l[0])); }},
      {"relu", [](L l) { return sum(relu(l[0]) * l[1]); }},
      {"relu6", [](L l) { return sum(relu6(l[0] * 4.0) * l[1]); }},
      {"softplus", [](L l) { return sum(softplus(l[0] * 5.0)); }},
      {"cos", [](L l) { return sum(cos(l[0])); }},
      {"bias", [](L l) { return sum(square(l[0] + l[2])); }},
      {"matmul", [](L l) { return sum(square(matmul(l[0], l[3]))); }},
      {"log_softmax", [](L l) { return sum(log_softmax(l[0]) * l[1]); }},
      {"log_mean_exp", [](L l) { return log_mean_exp(l[0] * 3.0); }},
      {"take_rows", [](L l) {
         const std::size_t r[] = {2, 2, 0};
         return sum(square(take_rows(l[0], r)));
       }},
  };
  Rng rng(3);
  for (const auto& [name, expr] : cases) {
    for (int trial = 0; trial < 5; ++trial) {
      testing::RandomGraph g = testing::random_graph(rng);
      auto result = testing::check_gradients(g.leaves, expr);
      EXPECT_LE(result.max_rel_error, 1e-4) << name;
    }
  }
}

TEST(GradientPropertyTest, RandomCompositionsMatchFiniteDifferences) {
  Rng rng(2020);
  for (int i = 0; i < 100; ++i) {
    testing::RandomGraph g = testing::random_graph(rng, 6);
    auto result = testing::check_gradients(g.leaves, g.loss);
    EXPECT_LE(result.max_rel_error, 1e-4) << g.description;
  }
}

TEST(DeterminismTest, IdenticalSequencesGiveIdenticalBits) {
  auto run = [] {
    Rng rng(99);
    testing::RandomGraph g = testing::random_graph(rng, 6);
    Tape tape;
    Tensor loss = g.loss(g.leaves);
    Gradients grads = tape.backward(loss);
    std::vector<double> out = {loss.item()};
    for (const auto& leaf : g.leaves) {
      if (grads.contains(leaf)) {
        auto gv = grads.of(leaf);
        out.insert(out.end(), gv.begin(), gv.end());
      }
    }
    return out;
  };
  const auto a = run();
  const auto b = run();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(std::memcmp(&a[i], &b[i], sizeof(double)), 0);
  }
}

TEST(TapeTest, RecordsAreTopologicallyOrdered) {
  Tensor x = Tensor::scalar(1.5, true);
  Tape tape;
  Tensor y = exp(x) * square(x) + x;
  for (std::size_t i = 0; i < tape.size(); ++i) {
    for (const auto& in : tape.record(i).inputs) {
      if (!in->is_leaf()) {
        EXPECT_LT(in->record, i);
      }
    }
    EXPECT_EQ(tape.record(i).output->record, i);
  }
  EXPECT_EQ(y.node()->record, tape.size() - 1);
}

TEST(TapeTest, NoRecordingWithoutActiveTape) {
  Tensor x = Tensor::scalar(2, true);
  Tensor y = square(x);
  EXPECT_FALSE(y.requires_grad());
}

}  // namespace
}  // namespace vpf::ad
