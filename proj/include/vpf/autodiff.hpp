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

// Dense reverse-mode automatic differentiation.
//
// Tensors are row-major arrays of doubles. Operations executed while a Tape
// is active, and with at least one input that requires a gradient, are
// recorded on that tape. Tape::backward replays the records in reverse and
// returns the gradient of a scalar loss with respect to every leaf tensor
// that requires a gradient.
//
//   ad::Tensor w = ad::Tensor::parameter({3, 1}, values);
//   ad::Tape tape;
//   ad::Tensor loss = ad::sum(ad::sigmoid(ad::matmul(x, w)));
//   ad::Gradients grads = tape.backward(loss);
//   std::span<const double> dw = grads.of(w);
//
// Binary elementwise operations broadcast when one operand's shape is a
// suffix of the other's (a row vector against a matrix, for example) or
// when one operand holds a single element.

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "vpf/error.hpp"

namespace vpf::ad {

using Shape = std::vector<std::size_t>;

inline std::size_t numel_of(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

inline std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

class Tape;

namespace detail {

inline std::uint64_t next_node_id() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until touched by backward
  bool requires_grad = false;
  Tape* tape = nullptr;  // tape that recorded the producing op; null for leaves
  std::size_t record = 0;
  std::uint64_t id = next_node_id();

  bool is_leaf() const { return tape == nullptr; }

  double* grad_buffer() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
    return grad.data();
  }
};

using NodePtr = std::shared_ptr<Node>;

inline Tape*& active_tape() {
  thread_local Tape* tape = nullptr;
  return tape;
}

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor from(Shape shape, std::vector<double> values,
                     bool requires_grad = false) {
    if (numel_of(shape) != values.size()) {
      throw DimensionError("tensor: shape " + to_string(shape) + " holds " +
                           std::to_string(numel_of(shape)) + " values, got " +
                           std::to_string(values.size()));
    }
    for (std::size_t extent : shape) {
      if (extent == 0) {
        throw DimensionError("tensor: zero extent in shape " +
                             to_string(shape));
      }
    }
    auto node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->value = std::move(values);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
  }

  static Tensor parameter(Shape shape, std::vector<double> values) {
    return from(std::move(shape), std::move(values), true);
  }

  static Tensor full(Shape shape, double value, bool requires_grad = false) {
    const std::size_t n = numel_of(shape);
    return from(std::move(shape), std::vector<double>(n, value),
                requires_grad);
  }

  static Tensor zeros(Shape shape) { return full(std::move(shape), 0.0); }

  static Tensor scalar(double value, bool requires_grad = false) {
    return from({}, {value}, requires_grad);
  }

  // Row-major matrix from nested initializer lists, mostly for tests.
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows,
                       bool requires_grad = false) {
    std::vector<double> values;
    std::size_t cols = rows.size() ? rows.begin()->size() : 0;
    for (const auto& row : rows) {
      if (row.size() != cols) throw DimensionError("matrix: ragged rows");
      values.insert(values.end(), row.begin(), row.end());
    }
    return from({rows.size(), cols}, std::move(values), requires_grad);
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t numel() const { return node_->value.size(); }
  std::size_t dim() const { return node_->shape.size(); }
  std::size_t rows() const { return dim() == 0 ? 1 : node_->shape.front(); }
  std::size_t cols() const {
    return dim() < 2 ? numel() : numel() / node_->shape.front();
  }
  std::size_t last_extent() const {
    return dim() == 0 ? 1 : node_->shape.back();
  }

  std::span<const double> values() const { return node_->value; }
  // Direct write access, for optimizers updating leaf parameters.
  std::span<double> mutable_values() {
    if (!node_->is_leaf()) {
      throw TapeError("mutable_values: tensor is the output of a recorded op");
    }
    return node_->value;
  }

  double item() const {
    if (numel() != 1) {
      throw ContractError("item: tensor of shape " + to_string(shape()) +
                          " is not a scalar");
    }
    return node_->value[0];
  }
  double operator[](std::size_t i) const { return node_->value[i]; }
  double at(std::size_t r, std::size_t c) const {
    return node_->value[r * cols() + c];
  }

  bool requires_grad() const { return node_->requires_grad; }
  std::uint64_t id() const { return node_->id; }

  // Same values, cut from any tape.
  Tensor detach() const { return from(shape(), node_->value, false); }

  const detail::NodePtr& node() const { return node_; }
  explicit Tensor(detail::NodePtr node) : node_(std::move(node)) {}

 private:
  detail::NodePtr node_;
};

// Gradients of one backward pass, keyed by leaf tensor.
class Gradients {
 public:
  bool contains(const Tensor& t) const { return grads_.count(t.id()) != 0; }

  std::span<const double> of(const Tensor& t) const& { return find(t); }
  std::vector<double> of(const Tensor& t) && { return find(t); }

  std::size_t size() const { return grads_.size(); }

  void set(std::uint64_t id, std::vector<double> grad) {
    grads_[id] = std::move(grad);
  }

 private:
  const std::vector<double>& find(const Tensor& t) const {
    auto it = grads_.find(t.id());
    if (it == grads_.end()) {
      throw ContractError("gradients: tensor has no gradient in this pass");
    }
    return it->second;
  }

  std::unordered_map<std::uint64_t, std::vector<double>> grads_;
};

// Define-by-run tape. Constructing a tape makes it the active tape of the
// calling thread until it is destroyed; tapes nest.
class Tape {
 public:
  struct Record {
    std::vector<detail::NodePtr> inputs;
    detail::NodePtr output;
    std::function<void()> backward;
  };

  Tape() : previous_(detail::active_tape()) { detail::active_tape() = this; }
  ~Tape() { detail::active_tape() = previous_; }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active() { return detail::active_tape(); }

  std::size_t size() const { return records_.size(); }
  const Record& record(std::size_t i) const { return records_[i]; }

  std::size_t push(Record record) {
    records_.push_back(std::move(record));
    return records_.size() - 1;
  }

  // Gradient of `loss` with respect to every leaf that requires a gradient
  // and feeds into it. A tape can be differentiated once; call reset() to
  // reuse it.
  Gradients backward(const Tensor& loss) {
    if (!loss.defined() || loss.numel() != 1) {
      throw ContractError("backward: loss must be a scalar, got shape " +
                          (loss.defined() ? to_string(loss.shape())
                                          : std::string("<undefined>")));
    }
    const auto& out = loss.node();
    if (out->tape != this) {
      throw TapeError("backward: loss was not recorded on this tape");
    }
    if (consumed_) {
      throw TapeError("backward: tape already differentiated; reset first");
    }
    consumed_ = true;

    std::vector<detail::NodePtr> leaves;
    auto note_leaves = [&](const Record& rec) {
      for (const auto& in : rec.inputs) {
        if (in->is_leaf() && in->requires_grad && !in->grad.empty() &&
            std::find(leaves.begin(), leaves.end(), in) == leaves.end()) {
          leaves.push_back(in);
        }
      }
    };

    out->grad.assign(1, 1.0);
    for (std::size_t i = out->record + 1; i-- > 0;) {
      Record& rec = records_[i];
      if (rec.output->grad.empty()) continue;
      rec.backward();
      note_leaves(rec);
    }

    Gradients grads;
    for (const auto& leaf : leaves) {
      grads.set(leaf->id, std::move(leaf->grad));
      leaf->grad.clear();
    }
    for (auto& rec : records_) rec.output->grad.clear();
    return grads;
  }

  void reset() {
    records_.clear();
    consumed_ = false;
  }

 private:
  Tape* previous_;
  std::vector<Record> records_;
  bool consumed_ = false;
};

namespace detail {

inline bool should_record(std::initializer_list<const Tensor*> inputs) {
  if (Tape::active() == nullptr) return false;
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

inline Tensor make_output(Shape shape, std::vector<double> values) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  return Tensor(std::move(node));
}

// Registers `out` as produced from `inputs`; `fn` receives the output
// gradient and must accumulate into the inputs that require gradients.
template <typename Fn>
void record(Tensor& out, std::vector<Tensor> inputs, Fn fn) {
  Tape* tape = Tape::active();
  Tape::Record rec;
  for (const Tensor& in : inputs) rec.inputs.push_back(in.node());
  rec.output = out.node();
  out.node()->requires_grad = true;
  out.node()->tape = tape;
  rec.backward = [fn = std::move(fn), out_node = out.node()]() mutable {
    fn(std::span<const double>(out_node->grad));
  };
  out.node()->record = tape->push(std::move(rec));
}

inline double* grad_if_needed(const Tensor& t) {
  return t.requires_grad() ? t.node()->grad_buffer() : nullptr;
}

inline bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

// Elementwise op with suffix/scalar broadcasting. `f(a, b)` computes the
// value; `da(a, b, y)` and `db(a, b, y)` the partial derivatives.
template <typename F, typename DA, typename DB>
Tensor binary(const char* name, const Tensor& a, const Tensor& b, F f, DA da,
              DB db) {
  const std::size_t na = a.numel();
  const std::size_t nb = b.numel();
  Shape shape;
  if (a.shape() == b.shape() || nb == 1 || is_suffix(b.shape(), a.shape())) {
    shape = a.shape();
  } else if (na == 1 || is_suffix(a.shape(), b.shape())) {
    shape = b.shape();
  } else {
    throw DimensionError(std::string(name) + ": shapes " +
                         to_string(a.shape()) + " and " +
                         to_string(b.shape()) + " do not broadcast");
  }
  const std::size_t n = numel_of(shape);
  std::vector<double> out(n);
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < n; ++i) out[i] = f(av[i % na], bv[i % nb]);
  Tensor y = make_output(shape, std::move(out));
  if (should_record({&a, &b})) {
    record(y, {a, b}, [a, b, y_node = y.node().get(), n, na, nb, da,
                       db](std::span<const double> g) {
      auto av = a.values();
      auto bv = b.values();
      const auto& yv = y_node->value;
      if (double* ga = grad_if_needed(a)) {
        for (std::size_t i = 0; i < n; ++i) {
          ga[i % na] += g[i] * da(av[i % na], bv[i % nb], yv[i]);
        }
      }
      if (double* gb = grad_if_needed(b)) {
        for (std::size_t i = 0; i < n; ++i) {
          gb[i % nb] += g[i] * db(av[i % na], bv[i % nb], yv[i]);
        }
      }
    });
  }
  return y;
}

// Elementwise op; `df(x, y)` is the derivative given input and output.
template <typename F, typename DF>
Tensor unary(const Tensor& x, F f, DF df) {
  auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  Tensor y = make_output(x.shape(), std::move(out));
  if (should_record({&x})) {
    record(y, {x}, [x, y_node = y.node().get(), df](std::span<const double> g) {
      double* gx = grad_if_needed(x);
      auto xv = x.values();
      const auto& yv = y_node->value;
      for (std::size_t i = 0; i < xv.size(); ++i) gx[i] += g[i] * df(xv[i], yv[i]);
    });
  }
  return y;
}

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

}  // namespace detail

// --- elementwise arithmetic -------------------------------------------------

inline Tensor add(const Tensor& a, const Tensor& b) {
  return detail::binary(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double, double) { return 1.0; },
      [](double, double, double) { return 1.0; });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  return detail::binary(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double, double) { return 1.0; },
      [](double, double, double) { return -1.0; });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  return detail::binary(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double, double y, double) { return y; },
      [](double x, double, double) { return x; });
}

inline Tensor div(const Tensor& a, const Tensor& b) {
  return detail::binary(
      "div", a, b, [](double x, double y) { return x / y; },
      [](double, double y, double) { return 1.0 / y; },
      [](double, double y, double q) { return -q / y; });
}

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator+(const Tensor& a, double c) { return add(a, Tensor::scalar(c)); }
inline Tensor operator-(const Tensor& a, double c) { return sub(a, Tensor::scalar(c)); }
inline Tensor operator*(const Tensor& a, double c) { return mul(a, Tensor::scalar(c)); }
inline Tensor operator*(double c, const Tensor& a) { return mul(Tensor::scalar(c), a); }
inline Tensor operator/(const Tensor& a, double c) { return div(a, Tensor::scalar(c)); }
inline Tensor operator-(double c, const Tensor& a) { return sub(Tensor::scalar(c), a); }
inline Tensor operator-(const Tensor& a) { return mul(Tensor::scalar(-1.0), a); }

// --- elementwise functions --------------------------------------------------

inline Tensor exp(const Tensor& x) {
  return detail::unary(
      x, [](double v) { return std::exp(v); },
      [](double, double y) { return y; });
}

inline Tensor log(const Tensor& x) {
  return detail::unary(
      x, [](double v) { return std::log(v); },
      [](double v, double) { return 1.0 / v; });
}

inline Tensor square(const Tensor& x) {
  return detail::unary(
      x, [](double v) { return v * v; },
      [](double v, double) { return 2.0 * v; });
}

inline Tensor cos(const Tensor& x) {
  return detail::unary(
      x, [](double v) { return std::cos(v); },
      [](double v, double) { return -std::sin(v); });
}

inline double sigmoid_value(double v) {
  if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

inline Tensor sigmoid(const Tensor& x) {
  return detail::unary(
      x, sigmoid_value, [](double, double y) { return y * (1.0 - y); });
}

// log(1 + e^x), stable for large |x|.
inline double softplus_value(double v) {
  return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v)));
}

inline Tensor softplus(const Tensor& x) {
  return detail::unary(
      x, softplus_value, [](double v, double) { return sigmoid_value(v); });
}

inline Tensor relu(const Tensor& x) {
  return detail::unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

inline Tensor relu6(const Tensor& x) {
  return detail::unary(
      x, [](double v) { return std::min(std::max(v, 0.0), 6.0); },
      [](double v, double) { return (v > 0.0 && v < 6.0) ? 1.0 : 0.0; });
}

// Clamp with zero gradient outside [lo, hi].
inline Tensor clamp(const Tensor& x, double lo, double hi) {
  return detail::unary(
      x, [lo, hi](double v) { return std::min(std::max(v, lo), hi); },
      [lo, hi](double v, double) { return (v >= lo && v <= hi) ? 1.0 : 0.0; });
}

// --- reductions --------------------------------------------------------------

inline Tensor sum(const Tensor& x) {
  auto xv = x.values();
  double s = 0.0;
  for (double v : xv) s += v;
  Tensor y = detail::make_output({}, {s});
  if (detail::should_record({&x})) {
    detail::record(y, {x}, [x](std::span<const double> g) {
      double* gx = detail::grad_if_needed(x);
      for (std::size_t i = 0; i < x.numel(); ++i) gx[i] += g[0];
    });
  }
  return y;
}

inline Tensor mean(const Tensor& x) {
  return sum(x) / static_cast<double>(x.numel());
}

// Sum over the last axis: [..., K] -> [...]; a vector reduces to a scalar.
inline Tensor sum_last(const Tensor& x) {
  const std::size_t k = x.last_extent();
  const std::size_t outer = x.numel() / k;
  Shape shape = x.shape();
  if (!shape.empty()) shape.pop_back();
  std::vector<double> out(outer, 0.0);
  auto xv = x.values();
  for (std::size_t r = 0; r < outer; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < k; ++c) s += xv[r * k + c];
    out[r] = s;
  }
  Tensor y = detail::make_output(std::move(shape), std::move(out));
  if (detail::should_record({&x})) {
    detail::record(y, {x}, [x, k, outer](std::span<const double> g) {
      double* gx = detail::grad_if_needed(x);
      for (std::size_t r = 0; r < outer; ++r) {
        for (std::size_t c = 0; c < k; ++c) gx[r * k + c] += g[r];
      }
    });
  }
  return y;
}

// log(mean(exp(x))) over all elements, max-shifted.
inline Tensor log_mean_exp(const Tensor& x) {
  auto xv = x.values();
  const double m = *std::max_element(xv.begin(), xv.end());
  double s = 0.0;
  for (double v : xv) s += std::exp(v - m);
  const double n = static_cast<double>(xv.size());
  Tensor y = detail::make_output({}, {m + std::log(s / n)});
  if (detail::should_record({&x})) {
    detail::record(y, {x}, [x, m, s](std::span<const double> g) {
      double* gx = detail::grad_if_needed(x);
      auto xv = x.values();
      for (std::size_t i = 0; i < xv.size(); ++i) {
        gx[i] += g[0] * std::exp(xv[i] - m) / s;
      }
    });
  }
  return y;
}

// --- linear algebra and layout ----------------------------------------------

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.dim() != 2 || b.dim() != 2 || a.shape()[1] != b.shape()[0]) {
    throw DimensionError("matmul: shapes " + to_string(a.shape()) + " and " +
                         to_string(b.shape()) + " are incompatible");
  }
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  std::vector<double> out(m * n);
  detail::ConstMap am(a.values().data(), m, k);
  detail::ConstMap bm(b.values().data(), k, n);
  detail::MutMap(out.data(), m, n).noalias() = am * bm;
  Tensor y = detail::make_output({m, n}, std::move(out));
  if (detail::should_record({&a, &b})) {
    detail::record(y, {a, b}, [a, b, m, k, n](std::span<const double> g) {
      detail::ConstMap gm(g.data(), m, n);
      if (double* ga = detail::grad_if_needed(a)) {
        detail::ConstMap bm(b.values().data(), k, n);
        detail::MutMap(ga, m, k).noalias() += gm * bm.transpose();
      }
      if (double* gb = detail::grad_if_needed(b)) {
        detail::ConstMap am(a.values().data(), m, k);
        detail::MutMap(gb, k, n).noalias() += am.transpose() * gm;
      }
    });
  }
  return y;
}

// Concatenate along the last axis; leading extents must agree.
inline Tensor concat_last(const Tensor& a, const Tensor& b) {
  Shape sa = a.shape(), sb = b.shape();
  if (sa.empty() || sb.empty() || sa.size() != sb.size() ||
      !std::equal(sa.begin(), sa.end() - 1, sb.begin())) {
    throw DimensionError("concat_last: shapes " + to_string(sa) + " and " +
                         to_string(sb) + " are incompatible");
  }
  const std::size_t ka = sa.back(), kb = sb.back();
  const std::size_t outer = a.numel() / ka;
  Shape shape = sa;
  shape.back() = ka + kb;
  std::vector<double> out(outer * (ka + kb));
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t r = 0; r < outer; ++r) {
    std::copy_n(av.data() + r * ka, ka, out.data() + r * (ka + kb));
    std::copy_n(bv.data() + r * kb, kb, out.data() + r * (ka + kb) + ka);
  }
  Tensor y = detail::make_output(std::move(shape), std::move(out));
  if (detail::should_record({&a, &b})) {
    detail::record(y, {a, b}, [a, b, ka, kb, outer](std::span<const double> g) {
      const std::size_t w = ka + kb;
      if (double* ga = detail::grad_if_needed(a)) {
        for (std::size_t r = 0; r < outer; ++r)
          for (std::size_t c = 0; c < ka; ++c) ga[r * ka + c] += g[r * w + c];
      }
      if (double* gb = detail::grad_if_needed(b)) {
        for (std::size_t r = 0; r < outer; ++r)
          for (std::size_t c = 0; c < kb; ++c) gb[r * kb + c] += g[r * w + ka + c];
      }
    });
  }
  return y;
}

// Columns [begin, end) of the last axis.
inline Tensor slice_last(const Tensor& x, std::size_t begin, std::size_t end) {
  const std::size_t k = x.last_extent();
  if (x.dim() == 0 || begin >= end || end > k) {
    throw DimensionError("slice_last: range [" + std::to_string(begin) + "," +
                         std::to_string(end) + ") invalid for shape " +
                         to_string(x.shape()));
  }
  const std::size_t w = end - begin;
  const std::size_t outer = x.numel() / k;
  Shape shape = x.shape();
  shape.back() = w;
  std::vector<double> out(outer * w);
  auto xv = x.values();
  for (std::size_t r = 0; r < outer; ++r) {
    std::copy_n(xv.data() + r * k + begin, w, out.data() + r * w);
  }
  Tensor y = detail::make_output(std::move(shape), std::move(out));
  if (detail::should_record({&x})) {
    detail::record(y, {x}, [x, k, w, begin, outer](std::span<const double> g) {
      double* gx = detail::grad_if_needed(x);
      for (std::size_t r = 0; r < outer; ++r)
        for (std::size_t c = 0; c < w; ++c) gx[r * k + begin + c] += g[r * w + c];
    });
  }
  return y;
}

// Selected rows of a matrix (or elements of a vector), in the given order.
inline Tensor take_rows(const Tensor& x, std::span<const std::size_t> rows) {
  if (x.dim() == 0 || rows.empty()) {
    throw DimensionError("take_rows: need a non-scalar tensor and >= 1 row");
  }
  const std::size_t n = x.shape()[0];
  const std::size_t w = x.numel() / n;
  Shape shape = x.shape();
  shape[0] = rows.size();
  std::vector<double> out(rows.size() * w);
  auto xv = x.values();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= n) {
      throw DimensionError("take_rows: row " + std::to_string(rows[i]) +
                           " out of range for shape " + to_string(x.shape()));
    }
    std::copy_n(xv.data() + rows[i] * w, w, out.data() + i * w);
  }
  Tensor y = detail::make_output(std::move(shape), std::move(out));
  if (detail::should_record({&x})) {
    std::vector<std::size_t> idx(rows.begin(), rows.end());
    detail::record(y, {x}, [x, idx = std::move(idx), w](std::span<const double> g) {
      double* gx = detail::grad_if_needed(x);
      for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::size_t c = 0; c < w; ++c) gx[idx[i] * w + c] += g[i * w + c];
    });
  }
  return y;
}

// Log-softmax over the last axis, max-shifted.
inline Tensor log_softmax(const Tensor& logits) {
  const std::size_t k = logits.last_extent();
  const std::size_t outer = logits.numel() / k;
  auto xv = logits.values();
  std::vector<double> out(xv.size());
  for (std::size_t r = 0; r < outer; ++r) {
    const double* row = xv.data() + r * k;
    const double m = *std::max_element(row, row + k);
    double s = 0.0;
    for (std::size_t c = 0; c < k; ++c) s += std::exp(row[c] - m);
    const double lse = m + std::log(s);
    for (std::size_t c = 0; c < k; ++c) out[r * k + c] = row[c] - lse;
  }
  Tensor y = detail::make_output(logits.shape(), std::move(out));
  if (detail::should_record({&logits})) {
    detail::record(y, {logits}, [logits, y_node = y.node().get(), k,
                                 outer](std::span<const double> g) {
      double* gx = detail::grad_if_needed(logits);
      const auto& yv = y_node->value;
      for (std::size_t r = 0; r < outer; ++r) {
        double gs = 0.0;
        for (std::size_t c = 0; c < k; ++c) gs += g[r * k + c];
        for (std::size_t c = 0; c < k; ++c) {
          gx[r * k + c] += g[r * k + c] - std::exp(yv[r * k + c]) * gs;
        }
      }
    });
  }
  return y;
}

}  // namespace vpf::ad
