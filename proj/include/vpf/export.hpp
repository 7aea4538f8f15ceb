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

// Representation dumps: encode a dataset with a trained model and read or
// write the result as CSV (columns y0..y{d-1}, s[, t]).

#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "vpf/audit.hpp"
#include "vpf/data.hpp"
#include "vpf/distributions.hpp"
#include "vpf/error.hpp"
#include "vpf/objectives.hpp"

namespace vpf::data {

enum class Encoding { kMean, kSampled };

struct Representations {
  std::size_t rows = 0;
  std::size_t dim = 0;
  std::vector<double> y;  // rows x dim
  std::vector<int> s;
  std::vector<int> t;  // empty without a task

  audit::AuditSet audit_set() const { return {y, dim, s, t}; }
};

// Mean encoding uses y = mu(x); sampled encoding draws y = mu + sigma * eps
// from `noise`. Runs without a tape in chunks.
inline Representations encode_dataset(const model::ModelGraph& m, const Dataset& d, Encoding mode,
                                      dist::NoiseSource& noise, std::size_t chunk = 4096) {
  if (d.schema->hash() != m.schema().hash()) {
    throw SchemaError("encode: dataset schema " + d.schema->name + " does not match the model schema");
  }
  Representations r;
  r.rows = d.n;
  r.dim = m.config().representation_dim;
  r.y.reserve(d.n * r.dim);
  r.s = d.s;
  r.t = d.t;
  std::vector<std::size_t> rows;
  for (std::size_t start = 0; start < d.n; start += chunk) {
    const std::size_t end = std::min(d.n, start + chunk);
    rows.resize(end - start);
    for (std::size_t i = start; i < end; ++i) rows[i - start] = i;
    const Batch b = make_batch(d, rows);
    const dist::GaussianHead head = m.encode(b.x, b.s_onehot);
    const ad::Tensor y = mode == Encoding::kMean ? head.mu : dist::reparam_sample(head, noise);
    const auto v = y.values();
    r.y.insert(r.y.end(), v.begin(), v.end());
  }
  return r;
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_representations(const Representations& r, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  for (std::size_t k = 0; k < r.dim; ++k) out << 'y' << k << ',';
  out << 's' << (r.t.empty() ? "" : ",t") << '\n';
  for (std::size_t i = 0; i < r.rows; ++i) {
    for (std::size_t k = 0; k < r.dim; ++k) out << format_double(r.y[i * r.dim + k]) << ',';
    out << r.s[i];
    if (!r.t.empty()) out << ',' << r.t[i];
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

inline Representations export_representations(const model::ModelGraph& m, const Dataset& d, const std::string& path,
                                              Encoding mode, dist::NoiseSource& noise) {
  Representations r = encode_dataset(m, d, mode, noise);
  write_representations(r, path);
  return r;
}

inline Representations read_representations(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw SchemaError(path + ": empty representation file");
  const auto header = split_csv_line(line);
  Representations r;
  while (r.dim < header.size() && header[r.dim] == "y" + std::to_string(r.dim)) ++r.dim;
  const bool has_t = header.size() == r.dim + 2 && header.back() == "t";
  if (r.dim == 0 || header.size() < r.dim + 1 || header[r.dim] != "s" || header.size() > r.dim + 2 ||
      (header.size() == r.dim + 2 && !has_t)) {
    throw SchemaError(path + ":1: expected header y0,...,y{d-1},s[,t]");
  }
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != header.size()) {
      throw SchemaError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(header.size()) +
                        " fields, got " + std::to_string(f.size()));
    }
    try {
      for (std::size_t k = 0; k < r.dim; ++k) {
        std::size_t used = 0;
        r.y.push_back(std::stod(f[k], &used));
        if (used != f[k].size()) throw std::invalid_argument(f[k]);
      }
      r.s.push_back(std::stoi(f[r.dim]));
      if (has_t) r.t.push_back(std::stoi(f[r.dim + 1]));
    } catch (const std::logic_error&) {
      throw SchemaError(path + ":" + std::to_string(lineno) + ": malformed number");
    }
    if (r.s.back() < 0 || (has_t && r.t.back() < 0)) {
      throw SchemaError(path + ":" + std::to_string(lineno) + ": negative label");
    }
    ++r.rows;
  }
  if (r.rows == 0) throw SchemaError(path + ": no rows");
  return r;
}

}  // namespace vpf::data
