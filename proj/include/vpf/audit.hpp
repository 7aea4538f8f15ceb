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

// Utility and group-fairness metrics, and the auditor classifiers trained on
// representations (or raw features) to measure them.

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vpf/error.hpp"
#include "vpf/rng.hpp"

namespace vpf::audit {

using Labels = std::span<const int>;

namespace detail {

inline void require_same_length(std::size_t a, std::size_t b, const char* op) {
  if (a != b) {
    throw ContractError(std::string(op) + ": length mismatch (" + std::to_string(a) + " vs " + std::to_string(b) + ")");
  }
  if (a == 0) throw ContractError(std::string(op) + ": empty input");
}

inline void require_binary(Labels v, const char* what) {
  for (int x : v) {
    if (x != 0 && x != 1) throw ContractError(std::string(what) + " must be binary (0/1)");
  }
}

// P(pred = 1) over rows where `keep` holds; empty selection is undefined.
template <typename Keep>
double positive_rate(Labels pred, Keep keep, const std::string& cell) {
  std::size_t n = 0, pos = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!keep(i)) continue;
    ++n;
    pos += pred[i] == 1;
  }
  if (n == 0) throw UndefinedMetricError("empty " + cell);
  return static_cast<double>(pos) / static_cast<double>(n);
}

}  // namespace detail

// Fraction of rows with pred == truth. Any number of classes.
inline double accuracy(Labels pred, Labels truth) {
  detail::require_same_length(pred.size(), truth.size(), "accuracy");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == truth[i];
  return static_cast<double>(hit) / static_cast<double>(pred.size());
}

// Demographic parity gap |P(w=1 | S=0) - P(w=1 | S=1)|.
inline double discrimination(Labels pred, Labels s) {
  detail::require_same_length(pred.size(), s.size(), "discrimination");
  detail::require_binary(pred, "discrimination: predictions");
  detail::require_binary(s, "discrimination: s");
  const double r0 = detail::positive_rate(pred, [&](std::size_t i) { return s[i] == 0; }, "group S=0");
  const double r1 = detail::positive_rate(pred, [&](std::size_t i) { return s[i] == 1; }, "group S=1");
  return std::abs(r0 - r1);
}

// |P(w != T | S=0) - P(w != T | S=1)|.
inline double error_gap(Labels pred, Labels s, Labels truth) {
  detail::require_same_length(pred.size(), s.size(), "error_gap");
  detail::require_same_length(pred.size(), truth.size(), "error_gap");
  detail::require_binary(s, "error_gap: s");
  std::vector<int> wrong(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) wrong[i] = pred[i] != truth[i];
  const double e0 = detail::positive_rate(wrong, [&](std::size_t i) { return s[i] == 0; }, "group S=0");
  const double e1 = detail::positive_rate(wrong, [&](std::size_t i) { return s[i] == 1; }, "group S=1");
  return std::abs(e0 - e1);
}

// max over tau of |P(w=1 | S=0, T=tau) - P(w=1 | S=1, T=tau)|.
inline double equalized_odds_gap(Labels pred, Labels s, Labels truth) {
  detail::require_same_length(pred.size(), s.size(), "equalized_odds_gap");
  detail::require_same_length(pred.size(), truth.size(), "equalized_odds_gap");
  detail::require_binary(pred, "equalized_odds_gap: predictions");
  detail::require_binary(s, "equalized_odds_gap: s");
  detail::require_binary(truth, "equalized_odds_gap: t");
  double gap = 0.0;
  for (int tau = 0; tau <= 1; ++tau) {
    auto rate = [&](int g) {
      return detail::positive_rate(pred, [&](std::size_t i) { return s[i] == g && truth[i] == tau; },
                                   "cell (S=" + std::to_string(g) + ", T=" + std::to_string(tau) + ")");
    };
    gap = std::max(gap, std::abs(rate(0) - rate(1)));
  }
  return gap;
}

// ---------------------------------------------------------------------------
// Predictors.

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstRowMap = Eigen::Map<const RowMatrix>;

// Row-major feature matrix view.
struct Features {
  std::span<const double> values;
  std::size_t rows = 0;
  std::size_t cols = 0;

  Features() = default;
  Features(std::span<const double> v, std::size_t r, std::size_t c) : values(v), rows(r), cols(c) {
    if (v.size() != r * c) {
      throw DimensionError("features: " + std::to_string(v.size()) + " values for " + std::to_string(r) + "x" +
                           std::to_string(c));
    }
  }
  double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  ConstRowMap matrix() const { return ConstRowMap(values.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)); }
};

enum class PredictorKind { kLogisticRegression, kRandomForest, kMajorityPrior };

inline const char* to_string(PredictorKind k) {
  switch (k) {
    case PredictorKind::kLogisticRegression: return "lr";
    case PredictorKind::kRandomForest: return "rf";
    case PredictorKind::kMajorityPrior: return "prior";
  }
  return "?";
}

struct LogisticOptions {
  double c = 1.0;  // inverse regularization strength
  std::size_t max_iter = 1000;
  double tol = 1e-6;
};

struct ForestOptions {
  std::size_t trees = 50;
  std::size_t max_depth = 16;
  std::size_t min_samples_split = 2;
};

namespace detail {

inline int num_classes(Labels y) {
  int k = 0;
  for (int v : y) {
    if (v < 0) throw ContractError("labels must be non-negative class indices");
    k = std::max(k, v + 1);
  }
  return k;
}

inline int majority(std::span<const std::size_t> counts) {
  return static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

// Multinomial (softmax) or binary (sigmoid) logistic regression minimizing
//   (1/n) sum_i logloss_i + ||W||^2 / (2 C n)
// by gradient descent with Armijo backtracking. The intercept is not
// penalized.
class Logistic {
 public:
  void fit(const Features& x, Labels y, int classes, const LogisticOptions& opt) {
    const auto n = static_cast<Eigen::Index>(x.rows);
    const auto f = static_cast<Eigen::Index>(x.cols);
    k_ = classes;
    const Eigen::Index out = classes == 2 ? 1 : classes;
    ConstRowMap X = x.matrix();
    Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(n, out);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (classes == 2) {
        Y(i, 0) = y[i];
      } else {
        Y(i, y[i]) = 1.0;
      }
    }
    w_ = Eigen::MatrixXd::Zero(f, out);
    b_ = Eigen::RowVectorXd::Zero(out);
    const double lam = 1.0 / (opt.c * static_cast<double>(n));

    auto objective = [&](const Eigen::MatrixXd& w, const Eigen::RowVectorXd& b, Eigen::MatrixXd* prob) {
      Eigen::MatrixXd z = (X * w).rowwise() + b;
      double loss = 0.0;
      if (classes == 2) {
        for (Eigen::Index i = 0; i < n; ++i) {
          const double zi = z(i, 0);
          // log(1 + e^z) - y z
          loss += (zi > 0 ? zi + std::log1p(std::exp(-zi)) : std::log1p(std::exp(zi))) - Y(i, 0) * zi;
          if (prob) z(i, 0) = 1.0 / (1.0 + std::exp(-zi));
        }
      } else {
        for (Eigen::Index i = 0; i < n; ++i) {
          const double m = z.row(i).maxCoeff();
          const double lse = m + std::log((z.row(i).array() - m).exp().sum());
          loss += lse - (z.row(i).array() * Y.row(i).array()).sum();
          if (prob) z.row(i) = (z.row(i).array() - lse).exp();
        }
      }
      if (prob) *prob = std::move(z);
      return loss / static_cast<double>(n) + 0.5 * lam * w.squaredNorm();
    };

    double step = 1.0;
    Eigen::MatrixXd prob;
    double fval = objective(w_, b_, &prob);
    for (std::size_t it = 0; it < opt.max_iter; ++it) {
      const Eigen::MatrixXd resid = (prob - Y) / static_cast<double>(n);
      const Eigen::MatrixXd gw = X.transpose() * resid + lam * w_;
      const Eigen::RowVectorXd gb = resid.colwise().sum();
      const double gnorm2 = gw.squaredNorm() + gb.squaredNorm();
      if (std::sqrt(gnorm2) < opt.tol) break;
      step *= 2.0;
      Eigen::MatrixXd w_new;
      Eigen::RowVectorXd b_new;
      double f_new = 0.0;
      while (true) {
        w_new = w_ - step * gw;
        b_new = b_ - step * gb;
        f_new = objective(w_new, b_new, nullptr);
        if (f_new <= fval - 0.5 * step * gnorm2 || step < 1e-12) break;
        step *= 0.5;
      }
      const double decrease = fval - f_new;
      w_ = std::move(w_new);
      b_ = std::move(b_new);
      fval = objective(w_, b_, &prob);
      if (decrease <= opt.tol * std::max(1.0, std::abs(fval))) break;
    }
  }

  std::vector<int> predict(const Features& x) const {
    const Eigen::MatrixXd z = (x.matrix() * w_).rowwise() + b_;
    std::vector<int> out(x.rows);
    for (std::size_t i = 0; i < x.rows; ++i) {
      if (k_ == 2) {
        out[i] = z(static_cast<Eigen::Index>(i), 0) > 0.0 ? 1 : 0;
      } else {
        Eigen::Index arg;
        z.row(static_cast<Eigen::Index>(i)).maxCoeff(&arg);
        out[i] = static_cast<int>(arg);
      }
    }
    return out;
  }

 private:
  int k_ = 2;
  Eigen::MatrixXd w_;
  Eigen::RowVectorXd b_;
};

// CART classification tree with Gini impurity.
class Tree {
 public:
  void fit(const Features& x, Labels y, int classes, std::vector<std::size_t> rows, std::size_t max_features,
           const ForestOptions& opt, Rng& rng) {
    nodes_.clear();
    classes_ = classes;
    grow(x, y, rows, 0, max_features, opt, rng);
  }

  int predict_row(const Features& x, std::size_t r) const {
    std::size_t i = 0;
    while (nodes_[i].feature >= 0) {
      i = x(r, static_cast<std::size_t>(nodes_[i].feature)) <= nodes_[i].threshold ? nodes_[i].left : nodes_[i].right;
    }
    return nodes_[i].label;
  }

  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    int feature = -1;  // -1 for leaves
    double threshold = 0.0;
    std::size_t left = 0, right = 0;
    int label = 0;
  };

  static double gini_sum(const std::vector<std::size_t>& counts, std::size_t n) {
    // n * (1 - sum p^2) = n - sum c^2 / n
    double s = 0.0;
    for (std::size_t c : counts) s += static_cast<double>(c) * static_cast<double>(c);
    return static_cast<double>(n) - s / static_cast<double>(n);
  }

  std::size_t grow(const Features& x, Labels y, std::vector<std::size_t>& rows, std::size_t depth,
                   std::size_t max_features, const ForestOptions& opt, Rng& rng) {
    const std::size_t id = nodes_.size();
    nodes_.emplace_back();
    std::vector<std::size_t> counts(static_cast<std::size_t>(classes_), 0);
    for (std::size_t r : rows) ++counts[static_cast<std::size_t>(y[r])];
    nodes_[id].label = majority(counts);
    const std::size_t n = rows.size();
    const bool pure = std::count(counts.begin(), counts.end(), 0) == classes_ - 1;
    if (pure || depth >= opt.max_depth || n < opt.min_samples_split) return id;

    // Features are visited in random order; the search stops after
    // max_features candidates once a valid split exists.
    std::vector<std::size_t> order(x.cols);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(std::span<std::size_t>(order));
    const double parent = gini_sum(counts, n);
    double best_gain = 1e-12;
    int best_feature = -1;
    double best_threshold = 0.0;
    std::vector<std::pair<double, int>> col(n);
    std::vector<std::size_t> left(static_cast<std::size_t>(classes_));
    for (std::size_t visited = 0; visited < order.size(); ++visited) {
      if (visited >= max_features && best_feature >= 0) break;
      const std::size_t f = order[visited];
      for (std::size_t i = 0; i < n; ++i) col[i] = {x(rows[i], f), y[rows[i]]};
      std::sort(col.begin(), col.end());
      if (col.front().first == col.back().first) continue;
      std::fill(left.begin(), left.end(), 0);
      std::vector<std::size_t> right = counts;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        ++left[static_cast<std::size_t>(col[i].second)];
        --right[static_cast<std::size_t>(col[i].second)];
        if (col[i].first == col[i + 1].first) continue;
        const double gain = parent - gini_sum(left, i + 1) - gini_sum(right, n - i - 1);
        if (gain > best_gain) {
          best_gain = gain;
          best_feature = static_cast<int>(f);
          best_threshold = 0.5 * (col[i].first + col[i + 1].first);
          // Midpoints of adjacent doubles can round onto the upper value.
          if (best_threshold >= col[i + 1].first) best_threshold = col[i].first;
        }
      }
    }
    if (best_feature < 0) return id;
    std::vector<std::size_t> lrows, rrows;
    for (std::size_t r : rows) {
      (x(r, static_cast<std::size_t>(best_feature)) <= best_threshold ? lrows : rrows).push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();
    nodes_[id].feature = best_feature;
    nodes_[id].threshold = best_threshold;
    const std::size_t l = grow(x, y, lrows, depth + 1, max_features, opt, rng);
    const std::size_t r = grow(x, y, rrows, depth + 1, max_features, opt, rng);
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
  }

  std::vector<Node> nodes_;
  int classes_ = 2;
};

}  // namespace detail

// A fitted classifier. Predictions are deterministic after fitting.
class Predictor {
 public:
  static Predictor fit(PredictorKind kind, const Features& x, Labels y, std::uint64_t seed,
                       const LogisticOptions& lr = {}, const ForestOptions& rf = {}) {
    detail::require_same_length(x.rows, y.size(), "fit");
    if (x.rows < 2) throw ContractError("fit: need at least 2 rows");
    Predictor p;
    p.kind_ = kind;
    p.classes_ = std::max(2, detail::num_classes(y));
    std::vector<std::size_t> counts(static_cast<std::size_t>(p.classes_), 0);
    for (int v : y) ++counts[static_cast<std::size_t>(v)];
    p.prior_ = detail::majority(counts);
    const auto present = std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; });
    if (kind != PredictorKind::kMajorityPrior && present < 2) {
      throw DomainError(std::string("fit(") + to_string(kind) + "): training labels contain a single class");
    }
    switch (kind) {
      case PredictorKind::kMajorityPrior:
        break;
      case PredictorKind::kLogisticRegression:
        p.logistic_.fit(x, y, p.classes_, lr);
        break;
      case PredictorKind::kRandomForest: {
        Rng rng(seed);
        const std::size_t max_features =
            std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(x.cols))));
        p.trees_.resize(rf.trees);
        for (auto& tree : p.trees_) {
          Rng tree_rng(rng.fork());
          std::vector<std::size_t> boot(x.rows);
          for (auto& r : boot) r = tree_rng.below(x.rows);
          tree.fit(x, y, p.classes_, std::move(boot), max_features, rf, tree_rng);
        }
        break;
      }
    }
    return p;
  }

  std::vector<int> predict(const Features& x) const {
    switch (kind_) {
      case PredictorKind::kMajorityPrior:
        return std::vector<int>(x.rows, prior_);
      case PredictorKind::kLogisticRegression:
        return logistic_.predict(x);
      case PredictorKind::kRandomForest: {
        std::vector<int> out(x.rows);
        std::vector<std::size_t> votes(static_cast<std::size_t>(classes_));
        for (std::size_t r = 0; r < x.rows; ++r) {
          std::fill(votes.begin(), votes.end(), 0);
          for (const auto& t : trees_) ++votes[static_cast<std::size_t>(t.predict_row(x, r))];
          out[r] = detail::majority(votes);
        }
        return out;
      }
    }
    return {};
  }

  PredictorKind kind() const { return kind_; }
  int classes() const { return classes_; }

 private:
  PredictorKind kind_ = PredictorKind::kMajorityPrior;
  int classes_ = 2;
  int prior_ = 0;
  detail::Logistic logistic_;
  std::vector<detail::Tree> trees_;
};

// ---------------------------------------------------------------------------
// Audit rows: predictors fit on the training split and scored on the test
// split.

struct AuditSet {
  std::vector<double> features;  // rows x cols
  std::size_t cols = 0;
  std::vector<int> s;
  std::vector<int> t;  // empty for privacy-only audits

  std::size_t rows() const { return s.size(); }
  Features view() const { return Features(features, rows(), cols); }
};

struct PredictorMetrics {
  std::optional<double> accuracy_t;
  double accuracy_s = 0.0;
  std::optional<double> discrimination;  // binary S and T only
  std::optional<double> error_gap;
  std::optional<double> equalized_odds_gap;
};

struct AuditRow {
  PredictorMetrics lr, rf;
  std::optional<double> prior_accuracy_t;
  double prior_accuracy_s = 0.0;
};

inline bool all_binary(Labels v) {
  return std::all_of(v.begin(), v.end(), [](int x) { return x == 0 || x == 1; });
}

inline PredictorMetrics audit_predictor(PredictorKind kind, const AuditSet& train, const AuditSet& test,
                                        std::uint64_t seed) {
  PredictorMetrics m;
  const Features xtr = train.view(), xte = test.view();
  const std::vector<int> ps = Predictor::fit(kind, xtr, train.s, seed).predict(xte);
  m.accuracy_s = accuracy(ps, test.s);
  if (!train.t.empty()) {
    const std::vector<int> pt = Predictor::fit(kind, xtr, train.t, seed + 1).predict(xte);
    m.accuracy_t = accuracy(pt, test.t);
    if (all_binary(test.s) && all_binary(test.t) && all_binary(train.t)) {
      m.discrimination = discrimination(pt, test.s);
      m.error_gap = error_gap(pt, test.s, test.t);
      m.equalized_odds_gap = equalized_odds_gap(pt, test.s, test.t);
    }
  }
  return m;
}

inline AuditRow audit_row(const AuditSet& train, const AuditSet& test, std::uint64_t seed) {
  if (train.cols != test.cols) throw DimensionError("audit_row: train and test widths differ");
  if (train.t.empty() != test.t.empty()) throw ContractError("audit_row: task labels on one split only");
  AuditRow row;
  row.lr = audit_predictor(PredictorKind::kLogisticRegression, train, test, seed);
  row.rf = audit_predictor(PredictorKind::kRandomForest, train, test, seed);
  row.prior_accuracy_s = audit_predictor(PredictorKind::kMajorityPrior, train, test, seed).accuracy_s;
  if (!train.t.empty()) {
    row.prior_accuracy_t = accuracy(Predictor::fit(PredictorKind::kMajorityPrior, train.view(), train.t, seed).predict(test.view()), test.t);
  }
  return row;
}

}  // namespace vpf::audit
