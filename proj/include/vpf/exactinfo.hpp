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

// Exact information measures on finite joint distributions. Values are in
// nats; 0 log 0 and 0 log(0/0) are taken to be 0.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "vpf/error.hpp"
#include "vpf/rng.hpp"

namespace vpf::info {

inline constexpr std::size_t kMaxTableEntries = 1'000'000;
inline constexpr double kSumTolerance = 1e-12;

using Vars = std::vector<std::string>;

// Probability table over named finite variables, row-major with the last
// variable varying fastest.
class DiscreteJoint {
 public:
  DiscreteJoint() = default;

  DiscreteJoint(Vars names, std::vector<std::size_t> dims, std::vector<double> p)
      : names_(std::move(names)), dims_(std::move(dims)), p_(std::move(p)) {
    if (names_.size() != dims_.size()) {
      throw ContractError("DiscreteJoint: " + std::to_string(names_.size()) +
                          " names for " + std::to_string(dims_.size()) + " dims");
    }
    std::size_t n = 1;
    for (std::size_t i = 0; i < dims_.size(); ++i) {
      if (dims_[i] == 0) throw ContractError("DiscreteJoint: variable " + names_[i] + " has no values");
      for (std::size_t j = 0; j < i; ++j) {
        if (names_[j] == names_[i]) throw ContractError("DiscreteJoint: duplicate variable " + names_[i]);
      }
      if (n > kMaxTableEntries / dims_[i]) {
        throw ContractError("DiscreteJoint: table exceeds " + std::to_string(kMaxTableEntries) + " entries");
      }
      n *= dims_[i];
    }
    if (p_.size() != n) {
      throw ContractError("DiscreteJoint: expected " + std::to_string(n) + " probabilities, got " +
                          std::to_string(p_.size()));
    }
    double total = 0.0;
    for (double v : p_) {
      if (!(v >= 0.0) || !std::isfinite(v)) throw ContractError("DiscreteJoint: negative or non-finite entry");
      total += v;
    }
    if (std::abs(total - 1.0) > kSumTolerance) {
      std::ostringstream msg;
      msg << "DiscreteJoint: probabilities sum to " << std::setprecision(17) << total;
      throw ContractError(msg.str());
    }
  }

  const Vars& names() const { return names_; }
  const std::vector<std::size_t>& dims() const { return dims_; }
  const std::vector<double>& probs() const { return p_; }
  std::size_t size() const { return p_.size(); }

  bool has(const std::string& name) const {
    return std::find(names_.begin(), names_.end(), name) != names_.end();
  }

  std::size_t index_of(const std::string& name) const {
    auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) throw ContractError("DiscreteJoint: no variable named " + name);
    return static_cast<std::size_t>(it - names_.begin());
  }

  std::size_t dim_of(const std::string& name) const { return dims_[index_of(name)]; }

  static DiscreteJoint unchecked(Vars names, std::vector<std::size_t> dims, std::vector<double> p) {
    DiscreteJoint j;
    j.names_ = std::move(names);
    j.dims_ = std::move(dims);
    j.p_ = std::move(p);
    return j;
  }

  // Marginal over `keep`, with variables in the order given.
  DiscreteJoint marginal(const Vars& keep) const {
    std::vector<std::size_t> idx, out_dims;
    for (const auto& name : keep) {
      const std::size_t k = index_of(name);
      if (std::find(idx.begin(), idx.end(), k) != idx.end()) {
        throw ContractError("marginal: variable " + name + " listed twice");
      }
      idx.push_back(k);
      out_dims.push_back(dims_[k]);
    }
    // Stride of each source variable inside the output table (0 if summed out).
    std::vector<std::size_t> out_stride(dims_.size(), 0);
    std::size_t stride = 1;
    for (std::size_t j = idx.size(); j-- > 0;) {
      out_stride[idx[j]] = stride;
      stride *= out_dims[j];
    }
    std::vector<double> out(stride, 0.0);
    std::vector<std::size_t> digit(dims_.size(), 0);
    std::size_t pos = 0;
    for (double v : p_) {
      out[pos] += v;
      for (std::size_t j = dims_.size(); j-- > 0;) {
        pos += out_stride[j];
        if (++digit[j] < dims_[j]) break;
        pos -= out_stride[j] * dims_[j];
        digit[j] = 0;
      }
    }
    return unchecked(keep, std::move(out_dims), std::move(out));
  }

 private:
  Vars names_;
  std::vector<std::size_t> dims_;
  std::vector<double> p_;
};

// Row-stochastic table p(out | in), rows indexed by the input value.
class Channel {
 public:
  Channel() = default;

  Channel(std::size_t in_dim, std::size_t out_dim, std::vector<double> table,
          std::string input = "X", std::string output = "Y")
      : in_(in_dim), out_(out_dim), q_(std::move(table)),
        input_(std::move(input)), output_(std::move(output)) {
    if (in_ == 0 || out_ == 0) throw ContractError("Channel: empty alphabet");
    if (q_.size() != in_ * out_) {
      throw ContractError("Channel: expected " + std::to_string(in_ * out_) + " entries, got " +
                          std::to_string(q_.size()));
    }
    for (std::size_t x = 0; x < in_; ++x) {
      double row = 0.0;
      for (std::size_t y = 0; y < out_; ++y) {
        const double v = q_[x * out_ + y];
        if (!(v >= 0.0) || !std::isfinite(v)) throw ContractError("Channel: negative or non-finite entry");
        row += v;
      }
      if (std::abs(row - 1.0) > kSumTolerance) {
        throw ContractError("Channel: row " + std::to_string(x) + " does not sum to 1");
      }
    }
  }

  static Channel identity(std::size_t n) {
    std::vector<double> t(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) t[i * n + i] = 1.0;
    return Channel(n, n, std::move(t));
  }

  static Channel constant(std::size_t in_dim, std::size_t out_dim, std::size_t value = 0) {
    std::vector<double> t(in_dim * out_dim, 0.0);
    for (std::size_t i = 0; i < in_dim; ++i) t[i * out_dim + value] = 1.0;
    return Channel(in_dim, out_dim, std::move(t));
  }

  std::size_t in_dim() const { return in_; }
  std::size_t out_dim() const { return out_; }
  const std::string& input() const { return input_; }
  const std::string& output() const { return output_; }
  double operator()(std::size_t x, std::size_t y) const { return q_[x * out_ + y]; }
  const std::vector<double>& table() const { return q_; }

 private:
  std::size_t in_ = 0, out_ = 0;
  std::vector<double> q_;
  std::string input_ = "X", output_ = "Y";
};

namespace detail {

inline double xlogy_ratio(double p, double num, double den) {
  if (p == 0.0) return 0.0;
  return p * std::log(num / den);
}

inline void require_disjoint(const Vars& a, const Vars& b, const char* op) {
  for (const auto& x : a) {
    if (std::find(b.begin(), b.end(), x) != b.end()) {
      throw ContractError(std::string(op) + ": variable " + x + " appears in two arguments");
    }
  }
}

inline Vars join(std::initializer_list<const Vars*> parts) {
  Vars out;
  for (const Vars* v : parts) out.insert(out.end(), v->begin(), v->end());
  return out;
}

inline std::size_t product(const std::vector<std::size_t>& d, std::size_t from, std::size_t to) {
  std::size_t n = 1;
  for (std::size_t i = from; i < to; ++i) n *= d[i];
  return n;
}

}  // namespace detail

inline double entropy(const DiscreteJoint& joint, const Vars& vars) {
  const DiscreteJoint m = joint.marginal(vars);
  double h = 0.0;
  for (double v : m.probs()) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

// I(A;B|C) = sum p(a,b,c) log [p(a,b,c) p(c) / (p(a,c) p(b,c))]. An empty C
// gives the unconditional mutual information.
inline double cond_mutual_info(const DiscreteJoint& joint, const Vars& a, const Vars& b,
                               const Vars& c) {
  if (a.empty() || b.empty()) throw ContractError("cond_mutual_info: empty variable set");
  detail::require_disjoint(a, b, "mutual_info");
  detail::require_disjoint(a, c, "cond_mutual_info");
  detail::require_disjoint(b, c, "cond_mutual_info");
  // Layout (C, A, B) so that fixed-c slices are contiguous.
  const DiscreteJoint abc = joint.marginal(detail::join({&c, &a, &b}));
  const auto& d = abc.dims();
  const std::size_t nc = detail::product(d, 0, c.size());
  const std::size_t na = detail::product(d, c.size(), c.size() + a.size());
  const std::size_t nb = detail::product(d, c.size() + a.size(), d.size());
  const auto& p = abc.probs();
  double total = 0.0;
  std::vector<double> pa(na), pb(nb);
  for (std::size_t ci = 0; ci < nc; ++ci) {
    const double* slice = p.data() + ci * na * nb;
    std::fill(pa.begin(), pa.end(), 0.0);
    std::fill(pb.begin(), pb.end(), 0.0);
    double pc = 0.0;
    for (std::size_t ai = 0; ai < na; ++ai) {
      for (std::size_t bi = 0; bi < nb; ++bi) {
        const double v = slice[ai * nb + bi];
        pa[ai] += v;
        pb[bi] += v;
        pc += v;
      }
    }
    for (std::size_t ai = 0; ai < na; ++ai) {
      for (std::size_t bi = 0; bi < nb; ++bi) {
        const double v = slice[ai * nb + bi];
        total += detail::xlogy_ratio(v, v * pc, pa[ai] * pb[bi]);
      }
    }
  }
  return std::max(total, 0.0);
}

inline double mutual_info(const DiscreteJoint& joint, const Vars& a, const Vars& b) {
  return cond_mutual_info(joint, a, b, {});
}

// Co-information I(A;B;C) = I(A;B) - I(A;B|C); may be negative.
inline double interaction_info(const DiscreteJoint& joint, const Vars& a, const Vars& b,
                               const Vars& c) {
  return mutual_info(joint, a, b) - cond_mutual_info(joint, a, b, c);
}

// Appends the channel output as the last variable:
// p(..., x, ..., y) = p(..., x, ...) p(y|x).
inline DiscreteJoint apply_channel(const DiscreteJoint& joint, const Channel& ch) {
  const std::size_t k = joint.index_of(ch.input());
  if (joint.dims()[k] != ch.in_dim()) {
    throw ContractError("apply_channel: channel expects |" + ch.input() + "| = " +
                        std::to_string(ch.in_dim()) + ", joint has " + std::to_string(joint.dims()[k]));
  }
  if (joint.has(ch.output())) {
    throw ContractError("apply_channel: joint already contains " + ch.output());
  }
  const auto& d = joint.dims();
  const std::size_t inner = detail::product(d, k + 1, d.size());
  const std::size_t ny = ch.out_dim();
  if (joint.size() > kMaxTableEntries / ny) {
    throw ContractError("apply_channel: result exceeds " + std::to_string(kMaxTableEntries) + " entries");
  }
  std::vector<double> out(joint.size() * ny);
  for (std::size_t i = 0; i < joint.size(); ++i) {
    const std::size_t x = (i / inner) % d[k];
    for (std::size_t y = 0; y < ny; ++y) out[i * ny + y] = joint.probs()[i] * ch(x, y);
  }
  Vars names = joint.names();
  names.push_back(ch.output());
  std::vector<std::size_t> dims = d;
  dims.push_back(ny);
  // Both inputs were validated; the product is not re-checked against the
  // sum tolerance so that marginalizing Y returns the input exactly.
  return DiscreteJoint::unchecked(std::move(names), std::move(dims), std::move(out));
}

struct LagrangianSuite {
  double lambda = 0.0;
  double gamma = 0.0;  // lambda + 1
  double alpha = 0.0;  // lambda / (lambda + 1)
  double beta = 0.0;   // lambda + 1

  // Information terms the Lagrangians are built from.
  double i_sy = 0.0, i_xy = 0.0, i_xy_s = 0.0;
  std::optional<double> i_ty_s, i_xy_st;

  double l_cpf = 0.0;  // I(S;Y) - lambda I(X;Y|S)
  double j_cpf = 0.0;  // I(X;Y) - gamma I(X;Y|S)
  double l_pf = 0.0;   // I(S;Y) - alpha I(X;Y)
  std::optional<double> l_cfb;  // I(S;Y) + I(X;Y|S,T) - lambda I(T;Y|S)
  std::optional<double> j_cfb;  // I(X;Y) - beta I(T;Y|S)

  // Largest absolute violation among the identities that apply.
  double max_residual() const {
    double r = std::max(std::abs(j_cpf - l_cpf), std::abs((lambda + 1.0) * l_pf - l_cpf));
    if (l_cfb && j_cfb) r = std::max(r, std::abs(*j_cfb - *l_cfb));
    return r;
  }
};

// Evaluates every Lagrangian on p(s,x[,t]) p(y|x). CFB entries are filled
// when the joint has a variable named T.
inline LagrangianSuite lagrangian_suite(const DiscreteJoint& joint, const Channel& ch, double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw ContractError("lagrangian_suite: lambda must be finite and >= 0");
  }
  const DiscreteJoint full = apply_channel(joint, ch);
  LagrangianSuite r;
  r.lambda = lambda;
  r.gamma = lambda + 1.0;
  r.alpha = lambda / (lambda + 1.0);
  r.beta = lambda + 1.0;
  r.i_sy = mutual_info(full, {"S"}, {"Y"});
  r.i_xy = mutual_info(full, {"X"}, {"Y"});
  r.i_xy_s = cond_mutual_info(full, {"X"}, {"Y"}, {"S"});
  r.l_cpf = r.i_sy - lambda * r.i_xy_s;
  r.j_cpf = r.i_xy - r.gamma * r.i_xy_s;
  r.l_pf = r.i_sy - r.alpha * r.i_xy;
  if (full.has("T")) {
    r.i_ty_s = cond_mutual_info(full, {"T"}, {"Y"}, {"S"});
    r.i_xy_st = cond_mutual_info(full, {"X"}, {"Y"}, {"S", "T"});
    r.l_cfb = r.i_sy + *r.i_xy_st - lambda * *r.i_ty_s;
    r.j_cfb = r.i_xy - r.beta * *r.i_ty_s;
  }
  return r;
}

// Variational tables for the bounds on I(X;Y), I(X;Y|S) and I(T;Y|S).
struct VariationalTables {
  std::vector<double> q_y;                 // [|Y|]
  std::vector<double> q_x_given_sy;        // [|S|][|Y|][|X|]
  std::optional<std::vector<double>> q_t_given_sy;  // [|S|][|Y|][|T|]
};

struct BoundGaps {
  double ixy = 0.0;    // E_x KL(p(y|x) || q(y)) - I(X;Y)
  double ixy_s = 0.0;  // I(X;Y|S) - E log q(x|s,y)/p(x|s)
  std::optional<double> ity_s;  // I(T;Y|S) - E log q(t|s,y)/p(t|s)
};

namespace detail {

inline void require_conditional(const std::vector<double>& q, std::size_t rows, std::size_t width,
                                const char* what) {
  if (q.size() != rows * width) {
    throw ContractError(std::string(what) + ": expected " + std::to_string(rows * width) +
                        " entries, got " + std::to_string(q.size()));
  }
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < width; ++j) {
      const double v = q[r * width + j];
      if (!(v >= 0.0) || !std::isfinite(v)) throw ContractError(std::string(what) + ": invalid entry");
      s += v;
    }
    if (std::abs(s - 1.0) > 1e-9) {
      throw ContractError(std::string(what) + ": row " + std::to_string(r) + " does not sum to 1");
    }
  }
}

// I(V;Y|S) - E log q(v|s,y)/p(v|s) for a (S, V, Y) table.
inline double conditional_gap(const DiscreteJoint& svy, const std::vector<double>& q) {
  const std::size_t ns = svy.dims()[0], nv = svy.dims()[1], ny = svy.dims()[2];
  const auto& p = svy.probs();
  double exact = 0.0, bound = 0.0;
  for (std::size_t s = 0; s < ns; ++s) {
    const double* slice = p.data() + s * nv * ny;
    double ps = 0.0;
    std::vector<double> pv(nv, 0.0), py(ny, 0.0);
    for (std::size_t v = 0; v < nv; ++v) {
      for (std::size_t y = 0; y < ny; ++y) {
        pv[v] += slice[v * ny + y];
        py[y] += slice[v * ny + y];
      }
      ps += pv[v];
    }
    for (std::size_t v = 0; v < nv; ++v) {
      for (std::size_t y = 0; y < ny; ++y) {
        const double pj = slice[v * ny + y];
        if (pj == 0.0) continue;
        exact += pj * std::log(pj * ps / (pv[v] * py[y]));
        // q(v|s,y) / p(v|s)
        bound += pj * std::log(q[(s * ny + y) * nv + v] * ps / pv[v]);
      }
    }
  }
  return exact - bound;
}

}  // namespace detail

inline BoundGaps bound_gap(const DiscreteJoint& joint, const Channel& ch, const VariationalTables& q) {
  const DiscreteJoint full = apply_channel(joint, ch);
  const std::size_t ns = full.dim_of("S"), nx = full.dim_of("X"), ny = ch.out_dim();
  detail::require_conditional(q.q_y, 1, ny, "bound_gap(q_y)");
  detail::require_conditional(q.q_x_given_sy, ns * ny, nx, "bound_gap(q_x_given_sy)");

  BoundGaps g;
  // E_x KL(p(y|x) || q(y)) - I(X;Y) = KL(p(y) || q(y)); both sides are
  // evaluated so the identity itself is not assumed.
  const std::vector<double> px = full.marginal({"X"}).probs();
  double upper = 0.0;
  for (std::size_t x = 0; x < nx; ++x) {
    for (std::size_t y = 0; y < ny; ++y) {
      upper += detail::xlogy_ratio(px[x] * ch(x, y), ch(x, y), q.q_y[y]);
    }
  }
  g.ixy = upper - mutual_info(full, {"X"}, {"Y"});
  g.ixy_s = detail::conditional_gap(full.marginal({"S", "X", "Y"}), q.q_x_given_sy);
  if (q.q_t_given_sy) {
    if (!full.has("T")) throw ContractError("bound_gap: q_t_given_sy given but the joint has no T");
    const std::size_t nt = full.dim_of("T");
    detail::require_conditional(*q.q_t_given_sy, ns * ny, nt, "bound_gap(q_t_given_sy)");
    g.ity_s = detail::conditional_gap(full.marginal({"S", "T", "Y"}), *q.q_t_given_sy);
  }
  return g;
}

// True marginal and posteriors, at which every gap is zero.
inline VariationalTables exact_tables(const DiscreteJoint& joint, const Channel& ch) {
  const DiscreteJoint full = apply_channel(joint, ch);
  VariationalTables t;
  t.q_y = full.marginal({"Y"}).probs();
  auto posterior = [&](const std::string& v) {
    const DiscreteJoint syv = full.marginal({"S", "Y", v});
    const std::size_t nv = syv.dims()[2];
    std::vector<double> q = syv.probs();
    for (std::size_t r = 0; r * nv < q.size(); ++r) {
      double s = 0.0;
      for (std::size_t j = 0; j < nv; ++j) s += q[r * nv + j];
      for (std::size_t j = 0; j < nv; ++j) q[r * nv + j] = s > 0.0 ? q[r * nv + j] / s : 1.0 / nv;
    }
    return q;
  };
  t.q_x_given_sy = posterior("X");
  if (full.has("T")) t.q_t_given_sy = posterior("T");
  return t;
}

struct AlternativeObjective {
  double lhs = 0.0;  // I(S;Y|T) + I(X;Y|S,T)
  double rhs = 0.0;  // I(X;Y) - I(T;Y|S) - I(S;Y;T)
};

inline AlternativeObjective equalized_odds_objective(const DiscreteJoint& full) {
  AlternativeObjective a;
  a.lhs = cond_mutual_info(full, {"S"}, {"Y"}, {"T"}) + cond_mutual_info(full, {"X"}, {"Y"}, {"S", "T"});
  a.rhs = mutual_info(full, {"X"}, {"Y"}) - cond_mutual_info(full, {"T"}, {"Y"}, {"S"}) -
          interaction_info(full, {"S"}, {"Y"}, {"T"});
  return a;
}

// Random fixtures. A fraction `zero_rate` of entries is set to zero so the
// 0 log 0 paths are exercised.
inline DiscreteJoint random_joint(Rng& rng, Vars names, std::vector<std::size_t> dims,
                                  double zero_rate = 0.0) {
  std::size_t n = 1;
  for (std::size_t d : dims) n *= d;
  std::vector<double> p(n);
  double total = 0.0;
  for (double& v : p) {
    v = rng.uniform() < zero_rate ? 0.0 : -std::log(1.0 - rng.uniform());
    total += v;
  }
  if (total == 0.0) {
    p[rng.below(n)] = 1.0;
    total = 1.0;
  }
  for (double& v : p) v /= total;
  return DiscreteJoint(std::move(names), std::move(dims), std::move(p));
}

inline std::vector<double> random_stochastic_rows(Rng& rng, std::size_t rows, std::size_t width,
                                                  double zero_rate = 0.0) {
  std::vector<double> t(rows * width);
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < width; ++j) {
      double& v = t[r * width + j];
      v = rng.uniform() < zero_rate ? 0.0 : -std::log(1.0 - rng.uniform());
      s += v;
    }
    if (s == 0.0) {
      t[r * width + rng.below(width)] = 1.0;
      s = 1.0;
    }
    for (std::size_t j = 0; j < width; ++j) t[r * width + j] /= s;
  }
  return t;
}

inline Channel random_channel(Rng& rng, std::size_t in_dim, std::size_t out_dim,
                              double zero_rate = 0.0) {
  return Channel(in_dim, out_dim, random_stochastic_rows(rng, in_dim, out_dim, zero_rate));
}

// ---------------------------------------------------------------------------
// Text formats.
//
// Joint:    vars S:2 X:4 [T:2]        Channel:  channel X:4 -> Y:3
//           <i_S> <i_X> [<i_T>] <p>             <x> <y> <p(y|x)>
//
// Blank lines and lines starting with '#' are ignored; omitted tuples are 0.

namespace detail {

inline std::pair<std::string, std::size_t> parse_var(const std::string& tok, int line) {
  const auto colon = tok.find(':');
  if (colon == std::string::npos || colon == 0) {
    throw SchemaError("line " + std::to_string(line) + ": expected NAME:SIZE, got '" + tok + "'");
  }
  std::size_t pos = 0;
  unsigned long long n = 0;
  try {
    n = std::stoull(tok.substr(colon + 1), &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || colon + 1 + pos != tok.size() || n == 0) {
    throw SchemaError("line " + std::to_string(line) + ": bad size in '" + tok + "'");
  }
  return {tok.substr(0, colon), static_cast<std::size_t>(n)};
}

inline bool next_content_line(std::istream& in, std::string& text, int& line) {
  while (std::getline(in, text)) {
    ++line;
    const auto first = text.find_first_not_of(" \t\r");
    if (first == std::string::npos || text[first] == '#') continue;
    return true;
  }
  return false;
}

inline void parse_rows(std::istream& in, int& line, const std::vector<std::size_t>& dims,
                       std::vector<double>& table) {
  std::vector<bool> seen(table.size(), false);
  std::string text;
  while (next_content_line(in, text, line)) {
    std::istringstream row(text);
    std::size_t flat = 0;
    for (std::size_t d : dims) {
      long long i = -1;
      if (!(row >> i) || i < 0 || static_cast<std::size_t>(i) >= d) {
        throw SchemaError("line " + std::to_string(line) + ": index out of range or missing");
      }
      flat = flat * d + static_cast<std::size_t>(i);
    }
    double v = 0.0;
    std::string rest;
    if (!(row >> v) || (row >> rest)) {
      throw SchemaError("line " + std::to_string(line) + ": expected one probability after the indices");
    }
    if (seen[flat]) throw SchemaError("line " + std::to_string(line) + ": duplicate index tuple");
    seen[flat] = true;
    table[flat] = v;
  }
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return in;
}

}  // namespace detail

inline DiscreteJoint read_joint(std::istream& in) {
  std::string text, tok;
  int line = 0;
  if (!detail::next_content_line(in, text, line)) throw SchemaError("joint: empty input");
  std::istringstream head(text);
  if (!(head >> tok) || tok != "vars") throw SchemaError("line " + std::to_string(line) + ": expected 'vars'");
  Vars names;
  std::vector<std::size_t> dims;
  std::size_t n = 1;
  while (head >> tok) {
    auto [name, d] = detail::parse_var(tok, line);
    names.push_back(name);
    dims.push_back(d);
    if (n > kMaxTableEntries / d) throw SchemaError("joint: table exceeds the entry cap");
    n *= d;
  }
  if (names.empty()) throw SchemaError("line " + std::to_string(line) + ": no variables declared");
  std::vector<double> p(n, 0.0);
  detail::parse_rows(in, line, dims, p);
  try {
    return DiscreteJoint(std::move(names), std::move(dims), std::move(p));
  } catch (const ContractError& e) {
    throw SchemaError(e.what());
  }
}

inline Channel read_channel(std::istream& in) {
  std::string text, kw, arrow, a, b;
  int line = 0;
  if (!detail::next_content_line(in, text, line)) throw SchemaError("channel: empty input");
  std::istringstream head(text);
  if (!(head >> kw >> a >> arrow >> b) || kw != "channel" || arrow != "->" || (head >> kw)) {
    throw SchemaError("line " + std::to_string(line) + ": expected 'channel X:n -> Y:m'");
  }
  auto [in_name, nx] = detail::parse_var(a, line);
  auto [out_name, ny] = detail::parse_var(b, line);
  std::vector<double> t(nx * ny, 0.0);
  detail::parse_rows(in, line, {nx, ny}, t);
  try {
    return Channel(nx, ny, std::move(t), in_name, out_name);
  } catch (const ContractError& e) {
    throw SchemaError(e.what());
  }
}

inline void write_joint(std::ostream& out, const DiscreteJoint& j) {
  out << "vars";
  for (std::size_t k = 0; k < j.names().size(); ++k) out << ' ' << j.names()[k] << ':' << j.dims()[k];
  out << '\n' << std::setprecision(17);
  const auto& d = j.dims();
  std::vector<std::size_t> digit(d.size(), 0);
  for (double v : j.probs()) {
    if (v != 0.0) {
      for (std::size_t i : digit) out << i << ' ';
      out << v << '\n';
    }
    for (std::size_t k = d.size(); k-- > 0;) {
      if (++digit[k] < d[k]) break;
      digit[k] = 0;
    }
  }
}

inline void write_channel(std::ostream& out, const Channel& ch) {
  out << "channel " << ch.input() << ':' << ch.in_dim() << " -> " << ch.output() << ':' << ch.out_dim()
      << '\n' << std::setprecision(17);
  for (std::size_t x = 0; x < ch.in_dim(); ++x) {
    for (std::size_t y = 0; y < ch.out_dim(); ++y) {
      if (ch(x, y) != 0.0) out << x << ' ' << y << ' ' << ch(x, y) << '\n';
    }
  }
}

inline DiscreteJoint load_joint(const std::string& path) {
  auto in = detail::open_input(path);
  return read_joint(in);
}

inline Channel load_channel(const std::string& path) {
  auto in = detail::open_input(path);
  return read_channel(in);
}

}  // namespace vpf::info
