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

// Tabular ingestion, preprocessing, train/test splits and the synthetic
// colored-glyph dataset.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "vpf/autodiff.hpp"
#include "vpf/distributions.hpp"
#include "vpf/error.hpp"
#include "vpf/rng.hpp"

namespace vpf::data {

using nlohmann::json;

// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[i] = digits[v & 0xf];
  return s;
}

enum class FeatureKind { kCategorical, kContinuous, kBinary };

inline const char* to_string(FeatureKind k) {
  switch (k) {
    case FeatureKind::kCategorical: return "categorical";
    case FeatureKind::kContinuous: return "continuous";
    case FeatureKind::kBinary: return "binary";
  }
  return "?";
}

struct FeatureSpec {
  std::string name;
  FeatureKind kind = FeatureKind::kContinuous;
  std::vector<std::string> levels;  // categorical, or the two binary values
  bool unknown_bucket = false;      // categorical: extra level for unseen values
  std::map<std::string, std::string> aliases;

  // Number of one-hot columns (categorical) or 1.
  std::size_t width() const {
    return kind == FeatureKind::kCategorical ? levels.size() + (unknown_bucket ? 1 : 0) : 1;
  }
};

// A discrete label column. With `positive` set, the column is binarized:
// value == positive gives 1, anything else 0.
struct LabelSpec {
  std::string name;
  std::vector<std::string> levels;
  std::map<std::string, std::string> aliases;
  std::optional<std::string> positive;

  std::size_t count() const { return levels.size(); }
};

struct Schema {
  std::string name;
  std::vector<FeatureSpec> features;
  LabelSpec sensitive;
  std::optional<LabelSpec> task;
  bool header = true;
  std::vector<std::string> columns;  // required when header is false
  std::string comment_prefix;
  std::vector<std::string> missing = {"?", ""};

  std::size_t encoded_width() const {
    std::size_t w = 0;
    for (const auto& f : features) w += f.width();
    return w;
  }

  std::size_t target_width() const { return features.size(); }

  std::size_t sensitive_levels() const { return sensitive.count(); }

  std::size_t task_levels() const { return task ? task->count() : 0; }

  // Offset of each feature's first column in the encoded matrix.
  std::vector<std::size_t> offsets() const {
    std::vector<std::size_t> o;
    std::size_t w = 0;
    for (const auto& f : features) {
      o.push_back(w);
      w += f.width();
    }
    return o;
  }

  // Product-of-factors decoder layout for reconstructing the features.
  dist::HeadLayout reconstruction_layout() const {
    dist::HeadLayout layout;
    for (const auto& f : features) {
      switch (f.kind) {
        case FeatureKind::kCategorical: layout.add_categorical(f.width()); break;
        case FeatureKind::kContinuous: layout.add_gaussian(); break;
        case FeatureKind::kBinary: layout.add_bernoulli(); break;
      }
    }
    return layout;
  }

  // Decoder layout for the task label: one Bernoulli unit when binary.
  dist::HeadLayout prediction_layout() const {
    if (!task) throw ConfigError("schema " + name + " has no task column");
    dist::HeadLayout layout;
    if (task->count() == 2) {
      layout.add_bernoulli();
    } else {
      layout.add_categorical(task->count());
    }
    return layout;
  }

  json to_json() const;
  std::uint64_t hash() const { return fnv1a(to_json().dump()); }

  void validate() const {
    if (features.empty()) throw SchemaError("schema " + name + ": no features");
    std::vector<std::string> names;
    for (const auto& f : features) {
      if (f.name.empty()) throw SchemaError("schema " + name + ": feature without a name");
      names.push_back(f.name);
      if (f.kind == FeatureKind::kCategorical && f.levels.size() < 2) {
        throw SchemaError("feature " + f.name + ": categorical needs at least 2 levels");
      }
      if (f.kind == FeatureKind::kBinary && !f.levels.empty() && f.levels.size() != 2) {
        throw SchemaError("feature " + f.name + ": binary needs exactly 2 levels or none");
      }
    }
    names.push_back(sensitive.name);
    if (task) names.push_back(task->name);
    auto sorted = names;
    std::sort(sorted.begin(), sorted.end());
    auto dup = std::adjacent_find(sorted.begin(), sorted.end());
    if (dup != sorted.end()) throw SchemaError("schema " + name + ": duplicate column " + *dup);
    if (sensitive.count() < 2) throw SchemaError("sensitive " + sensitive.name + ": needs at least 2 levels");
    if (task && task->count() < 2) throw SchemaError("task " + task->name + ": needs at least 2 levels");
    if (!header && columns.empty()) throw SchemaError("schema " + name + ": header=false requires columns");
  }
};

namespace detail {

inline std::map<std::string, std::string> aliases_from(const json& j) {
  std::map<std::string, std::string> m;
  if (j.contains("aliases")) {
    for (auto& [k, v] : j.at("aliases").items()) m[k] = v.get<std::string>();
  }
  return m;
}

inline LabelSpec label_from(const json& j) {
  LabelSpec l;
  l.name = j.at("name").get<std::string>();
  if (j.contains("positive")) {
    l.positive = j.at("positive").get<std::string>();
    l.levels = {"not " + *l.positive, *l.positive};
  }
  if (j.contains("levels")) l.levels = j.at("levels").get<std::vector<std::string>>();
  l.aliases = aliases_from(j);
  return l;
}

inline json label_to(const LabelSpec& l) {
  json j = {{"name", l.name}, {"levels", l.levels}};
  if (!l.aliases.empty()) j["aliases"] = l.aliases;
  if (l.positive) j["positive"] = *l.positive;
  return j;
}

}  // namespace detail

inline json Schema::to_json() const {
  json fs = json::array();
  for (const auto& f : features) {
    json j = {{"name", f.name}, {"kind", data::to_string(f.kind)}};
    if (!f.levels.empty()) j["levels"] = f.levels;
    if (f.unknown_bucket) j["unknown_bucket"] = true;
    if (!f.aliases.empty()) j["aliases"] = f.aliases;
    fs.push_back(j);
  }
  json j = {{"name", name}, {"features", fs}, {"sensitive", detail::label_to(sensitive)},
            {"header", header}, {"missing", missing}};
  if (task) j["task"] = detail::label_to(*task);
  if (!columns.empty()) j["columns"] = columns;
  if (!comment_prefix.empty()) j["comment_prefix"] = comment_prefix;
  return j;
}

inline Schema schema_from_json(const json& j) {
  try {
    Schema s;
    s.name = j.value("name", std::string("dataset"));
    for (const auto& fj : j.at("features")) {
      FeatureSpec f;
      f.name = fj.at("name").get<std::string>();
      const std::string kind = fj.at("kind").get<std::string>();
      if (kind == "categorical") {
        f.kind = FeatureKind::kCategorical;
      } else if (kind == "continuous") {
        f.kind = FeatureKind::kContinuous;
      } else if (kind == "binary") {
        f.kind = FeatureKind::kBinary;
      } else {
        throw SchemaError("feature " + f.name + ": unknown kind '" + kind + "'");
      }
      if (fj.contains("levels")) f.levels = fj.at("levels").get<std::vector<std::string>>();
      f.unknown_bucket = fj.value("unknown_bucket", false);
      f.aliases = detail::aliases_from(fj);
      s.features.push_back(std::move(f));
    }
    s.sensitive = detail::label_from(j.at("sensitive"));
    if (j.contains("task") && !j.at("task").is_null()) s.task = detail::label_from(j.at("task"));
    s.header = j.value("header", true);
    if (j.contains("columns")) s.columns = j.at("columns").get<std::vector<std::string>>();
    s.comment_prefix = j.value("comment_prefix", std::string());
    if (j.contains("missing")) s.missing = j.at("missing").get<std::vector<std::string>>();
    s.validate();
    return s;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("schema: ") + e.what());
  }
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  try {
    // Comments are allowed in fixture files.
    return json::parse(in, nullptr, true, true);
  } catch (const json::exception& e) {
    throw SchemaError(path + ": " + e.what());
  }
}

inline Schema load_schema(const std::string& path) { return schema_from_json(read_json_file(path)); }

// Encoded samples. Rows are stored row-major.
struct Dataset {
  std::shared_ptr<const Schema> schema;
  std::string split;  // "train", "test", "synthetic", ...
  std::size_t n = 0;
  std::vector<double> x;        // n x encoded_width: one-hot and z-scored
  std::vector<double> targets;  // n x target_width: level index or value per feature
  std::vector<int> s;
  std::vector<int> t;           // empty when the schema has no task
  std::vector<std::size_t> source_rows;  // data-row index in the input file

  std::size_t width() const { return schema->encoded_width(); }
  bool has_task() const { return !t.empty(); }

  std::vector<double> x_row(std::size_t i) const {
    const std::size_t w = width();
    return {x.begin() + i * w, x.begin() + (i + 1) * w};
  }
};

// Tensors for one minibatch.
struct Batch {
  ad::Tensor x;         // b x encoded_width
  ad::Tensor s_onehot;  // b x |S|
  ad::Tensor targets;   // b x target_width (reconstruction)
  ad::Tensor task;      // b x 1 (prediction); empty shape when no task
  std::vector<int> s;
  std::vector<int> t;
  std::size_t size() const { return s.size(); }
};

inline std::vector<double> one_hot(const std::vector<int>& labels, std::size_t k) {
  std::vector<double> out(labels.size() * k, 0.0);
  for (std::size_t i = 0; i < labels.size(); ++i) out[i * k + static_cast<std::size_t>(labels[i])] = 1.0;
  return out;
}

inline Batch make_batch(const Dataset& d, std::span<const std::size_t> rows) {
  const std::size_t b = rows.size(), w = d.width(), tw = d.schema->target_width();
  std::vector<double> x(b * w), tg(b * tw), task;
  Batch out;
  for (std::size_t r = 0; r < b; ++r) {
    const std::size_t i = rows[r];
    if (i >= d.n) throw ContractError("make_batch: row " + std::to_string(i) + " out of range");
    std::copy_n(d.x.begin() + i * w, w, x.begin() + r * w);
    std::copy_n(d.targets.begin() + i * tw, tw, tg.begin() + r * tw);
    out.s.push_back(d.s[i]);
    if (d.has_task()) {
      out.t.push_back(d.t[i]);
      task.push_back(d.t[i]);
    }
  }
  out.x = ad::Tensor::from({b, w}, std::move(x));
  out.s_onehot = ad::Tensor::from({b, d.schema->sensitive_levels()}, one_hot(out.s, d.schema->sensitive_levels()));
  out.targets = ad::Tensor::from({b, tw}, std::move(tg));
  if (d.has_task()) out.task = ad::Tensor::from({b, 1}, std::move(task));
  return out;
}

inline Batch make_batch(const Dataset& d) {
  std::vector<std::size_t> all(d.n);
  for (std::size_t i = 0; i < d.n; ++i) all[i] = i;
  return make_batch(d, all);
}

// ---------------------------------------------------------------------------
// CSV.

// Splits one line on commas, honoring double quotes; fields are trimmed.
inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false, was_quoted = false;
  auto flush = [&] {
    if (!was_quoted) {
      const auto a = cur.find_first_not_of(" \t\r");
      const auto b = cur.find_last_not_of(" \t\r");
      cur = a == std::string::npos ? std::string() : cur.substr(a, b - a + 1);
    }
    out.push_back(cur);
    cur.clear();
    was_quoted = false;
  };
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
      was_quoted = true;
      cur.clear();
    } else if (c == ',') {
      flush();
    } else if (!(was_quoted && (c == ' ' || c == '\t' || c == '\r'))) {
      cur += c;
    }
  }
  flush();
  return out;
}

struct RawTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based, for diagnostics
};

inline RawTable read_csv(const std::string& path, const Schema& schema) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  RawTable t;
  std::string line;
  std::size_t lineno = 0;
  bool need_header = schema.header;
  if (!need_header) t.columns = schema.columns;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (!schema.comment_prefix.empty() && line.rfind(schema.comment_prefix, 0) == 0) continue;
    auto fields = split_csv_line(line);
    if (need_header) {
      t.columns = std::move(fields);
      need_header = false;
      continue;
    }
    if (fields.size() != t.columns.size()) {
      throw SchemaError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.columns.size()) +
                        " fields, found " + std::to_string(fields.size()));
    }
    t.rows.push_back(std::move(fields));
    t.line_numbers.push_back(lineno);
  }
  if (t.columns.empty()) throw SchemaError(path + ": no header row");
  return t;
}

// ---------------------------------------------------------------------------
// Loading and preprocessing.

struct SplitSpec {
  double train_fraction = 0.7;
  std::uint64_t seed = 2020;
  std::optional<std::string> test_path;  // use a separate file as the test split
};

struct LoadReport {
  std::size_t rows_read = 0;
  std::size_t dropped_missing = 0;
  std::map<std::string, std::size_t> unknown_train;  // per feature
  std::map<std::string, std::size_t> unknown_test;
};

struct Standardizer {
  std::vector<double> mean, scale;  // per continuous feature, schema order
};

struct LoadedSplits {
  Dataset train, test;
  Standardizer stats;
  LoadReport report;
};

namespace detail {

inline std::string resolve(const std::map<std::string, std::string>& aliases, const std::string& v) {
  auto it = aliases.find(v);
  return it == aliases.end() ? v : it->second;
}

inline int level_index(const std::vector<std::string>& levels, const std::string& v) {
  auto it = std::find(levels.begin(), levels.end(), v);
  return it == levels.end() ? -1 : static_cast<int>(it - levels.begin());
}

inline bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  std::istringstream in(s);
  in.imbue(std::locale::classic());
  in >> out;
  return in && (in >> std::ws).eof() && std::isfinite(out);
}

// Parsed but not yet standardized rows.
struct Parsed {
  std::vector<std::vector<double>> values;  // per row: level index or raw value per feature
  std::vector<int> s, t;
  std::vector<std::size_t> source_rows;
};

inline int parse_label(const LabelSpec& l, const std::string& raw, const std::string& where) {
  const std::string v = resolve(l.aliases, raw);
  if (l.positive) return v == *l.positive ? 1 : 0;
  const int k = level_index(l.levels, v);
  if (k < 0) throw SchemaError(where + ": unknown " + l.name + " value '" + raw + "'");
  return k;
}

inline Parsed parse_rows(const RawTable& raw, const Schema& schema, const std::string& path,
                         LoadReport& report, std::map<std::string, std::size_t>& unknown) {
  auto col = [&](const std::string& name) {
    auto it = std::find(raw.columns.begin(), raw.columns.end(), name);
    if (it == raw.columns.end()) throw SchemaError(path + ": missing column " + name);
    return static_cast<std::size_t>(it - raw.columns.begin());
  };
  std::vector<std::size_t> fcols;
  for (const auto& f : schema.features) fcols.push_back(col(f.name));
  const std::size_t scol = col(schema.sensitive.name);
  const std::optional<std::size_t> tcol = schema.task ? std::optional(col(schema.task->name)) : std::nullopt;
  auto is_missing = [&](const std::string& v) {
    return std::find(schema.missing.begin(), schema.missing.end(), v) != schema.missing.end();
  };

  Parsed p;
  for (std::size_t r = 0; r < raw.rows.size(); ++r) {
    const auto& row = raw.rows[r];
    ++report.rows_read;
    bool missing = is_missing(row[scol]) || (tcol && is_missing(row[*tcol]));
    for (std::size_t c : fcols) missing = missing || is_missing(row[c]);
    if (missing) {
      ++report.dropped_missing;
      continue;
    }
    const std::string where = path + ":" + std::to_string(raw.line_numbers[r]);
    std::vector<double> vals(schema.features.size());
    for (std::size_t k = 0; k < schema.features.size(); ++k) {
      const auto& f = schema.features[k];
      const std::string v = resolve(f.aliases, row[fcols[k]]);
      switch (f.kind) {
        case FeatureKind::kCategorical: {
          int idx = level_index(f.levels, v);
          if (idx < 0) {
            if (!f.unknown_bucket) {
              throw SchemaError(where + ": unknown level '" + v + "' for feature " + f.name);
            }
            idx = static_cast<int>(f.levels.size());
            ++unknown[f.name];
          }
          vals[k] = idx;
          break;
        }
        case FeatureKind::kBinary: {
          if (!f.levels.empty()) {
            const int idx = level_index(f.levels, v);
            if (idx < 0) throw SchemaError(where + ": unknown level '" + v + "' for feature " + f.name);
            vals[k] = idx;
          } else if (!parse_double(v, vals[k]) || vals[k] < 0.0 || vals[k] > 1.0) {
            throw SchemaError(where + ": feature " + f.name + " needs a value in [0, 1], got '" + v + "'");
          }
          break;
        }
        case FeatureKind::kContinuous:
          if (!parse_double(v, vals[k])) {
            throw SchemaError(where + ": cannot parse '" + v + "' as a number for feature " + f.name);
          }
          break;
      }
    }
    p.s.push_back(parse_label(schema.sensitive, row[scol], where));
    if (tcol) p.t.push_back(parse_label(*schema.task, row[*tcol], where));
    p.values.push_back(std::move(vals));
    p.source_rows.push_back(r);
  }
  return p;
}

inline Standardizer fit_standardizer(const Schema& schema, const Parsed& p,
                                     const std::vector<std::size_t>& rows) {
  Standardizer st;
  for (std::size_t k = 0; k < schema.features.size(); ++k) {
    if (schema.features[k].kind != FeatureKind::kContinuous) continue;
    double mean = 0.0;
    for (std::size_t i : rows) mean += p.values[i][k];
    mean /= static_cast<double>(rows.size());
    double var = 0.0;
    for (std::size_t i : rows) var += (p.values[i][k] - mean) * (p.values[i][k] - mean);
    var /= static_cast<double>(rows.size());
    st.mean.push_back(mean);
    st.scale.push_back(var > 0.0 ? std::sqrt(var) : 1.0);
  }
  return st;
}

inline Dataset encode(std::shared_ptr<const Schema> schema, const Parsed& p,
                      const std::vector<std::size_t>& rows, const Standardizer& st, std::string split) {
  Dataset d;
  d.schema = schema;
  d.split = std::move(split);
  d.n = rows.size();
  const std::size_t w = schema->encoded_width(), tw = schema->target_width();
  d.x.assign(d.n * w, 0.0);
  d.targets.assign(d.n * tw, 0.0);
  const auto offs = schema->offsets();
  for (std::size_t r = 0; r < d.n; ++r) {
    const auto& vals = p.values[rows[r]];
    std::size_t ci = 0;
    for (std::size_t k = 0; k < schema->features.size(); ++k) {
      const auto& f = schema->features[k];
      double* xr = d.x.data() + r * w + offs[k];
      double& target = d.targets[r * tw + k];
      switch (f.kind) {
        case FeatureKind::kCategorical:
          xr[static_cast<std::size_t>(vals[k])] = 1.0;
          target = vals[k];
          break;
        case FeatureKind::kBinary:
          xr[0] = vals[k];
          target = vals[k];
          break;
        case FeatureKind::kContinuous:
          xr[0] = (vals[k] - st.mean[ci]) / st.scale[ci];
          target = xr[0];
          ++ci;
          break;
      }
    }
    d.s.push_back(p.s[rows[r]]);
    if (!p.t.empty()) d.t.push_back(p.t[rows[r]]);
    d.source_rows.push_back(p.source_rows[rows[r]]);
  }
  return d;
}

}  // namespace detail

inline std::size_t train_count(std::size_t n, double fraction) {
  return static_cast<std::size_t>(std::llround(static_cast<double>(n) * fraction));
}

// Reads `path` (and `split.test_path` when given), drops rows with missing
// cells, splits, and standardizes continuous features with training
// statistics only.
inline LoadedSplits load_tabular(const std::string& path, const Schema& schema, const SplitSpec& split = {}) {
  schema.validate();
  if (!(split.train_fraction > 0.0 && split.train_fraction < 1.0) && !split.test_path) {
    throw ConfigError("train_fraction must lie in (0, 1)");
  }
  auto shared = std::make_shared<const Schema>(schema);
  LoadedSplits out;
  detail::Parsed p = detail::parse_rows(read_csv(path, schema), schema, path, out.report, out.report.unknown_train);

  std::vector<std::size_t> train_rows, test_rows;
  detail::Parsed test_p;
  const detail::Parsed* test_src = &p;
  if (split.test_path) {
    for (std::size_t i = 0; i < p.values.size(); ++i) train_rows.push_back(i);
    test_p = detail::parse_rows(read_csv(*split.test_path, schema), schema, *split.test_path, out.report,
                                out.report.unknown_test);
    for (std::size_t i = 0; i < test_p.values.size(); ++i) test_rows.push_back(i);
    test_src = &test_p;
  } else {
    std::vector<std::size_t> perm(p.values.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    Rng rng(split.seed);
    rng.shuffle(std::span<std::size_t>(perm));
    const std::size_t n_train = train_count(perm.size(), split.train_fraction);
    train_rows.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
    test_rows.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
    std::sort(train_rows.begin(), train_rows.end());
    std::sort(test_rows.begin(), test_rows.end());
    // Unknown levels are counted per split.
    for (std::size_t i : test_rows) {
      for (std::size_t k = 0; k < schema.features.size(); ++k) {
        const auto& f = schema.features[k];
        if (f.kind == FeatureKind::kCategorical && p.values[i][k] == static_cast<double>(f.levels.size())) {
          --out.report.unknown_train[f.name];
          ++out.report.unknown_test[f.name];
        }
      }
    }
    std::erase_if(out.report.unknown_train, [](const auto& kv) { return kv.second == 0; });
  }
  if (train_rows.empty()) throw SchemaError(path + ": no usable training rows");
  out.stats = detail::fit_standardizer(schema, p, train_rows);
  out.train = detail::encode(shared, p, train_rows, out.stats, "train");
  out.test = detail::encode(shared, *test_src, test_rows, out.stats, "test");
  return out;
}

inline json split_manifest(const LoadedSplits& s, const SplitSpec& spec) {
  json j = {{"seed", spec.seed},
            {"train_fraction", spec.train_fraction},
            {"train_rows", s.train.source_rows},
            {"test_rows", s.test.source_rows},
            {"rows_read", s.report.rows_read},
            {"dropped_missing", s.report.dropped_missing},
            {"unknown_train", s.report.unknown_train},
            {"unknown_test", s.report.unknown_test}};
  if (spec.test_path) j["test_path"] = *spec.test_path;
  return j;
}

// Index of the active level in a categorical feature's one-hot block.
inline std::size_t decode_level(const Dataset& d, std::size_t row, std::size_t feature) {
  const auto& f = d.schema->features.at(feature);
  if (f.kind != FeatureKind::kCategorical) throw ContractError("decode_level: " + f.name + " is not categorical");
  const double* block = d.x.data() + row * d.width() + d.schema->offsets()[feature];
  return static_cast<std::size_t>(std::max_element(block, block + f.width()) - block);
}

// ---------------------------------------------------------------------------
// Synthetic colored glyphs: 8x8 RGB images of 10 glyph classes (task), each
// drawn in one of three colors (sensitive) chosen independently of the class.

inline constexpr std::size_t kGlyphSide = 8;
inline constexpr std::size_t kGlyphPixels = kGlyphSide * kGlyphSide;
inline constexpr std::size_t kGlyphClasses = 10;

inline const std::array<std::array<const char*, kGlyphSide>, kGlyphClasses>& glyph_bitmaps() {
  static const std::array<std::array<const char*, kGlyphSide>, kGlyphClasses> g = {{
      {"........", "..####..", ".#....#.", ".#....#.", ".#....#.", ".#....#.", "..####..", "........"},
      {"........", "...##...", "..###...", "...##...", "...##...", "...##...", "..####..", "........"},
      {"........", "..####..", ".#....#.", "......#.", "....##..", "..##....", ".######.", "........"},
      {"........", ".#####..", "......#.", "..####..", "......#.", "......#.", ".#####..", "........"},
      {"........", ".#...#..", ".#...#..", ".######.", ".....#..", ".....#..", ".....#..", "........"},
      {"........", ".######.", ".#......", ".#####..", "......#.", "......#.", ".#####..", "........"},
      {"........", "..####..", ".#......", ".#####..", ".#....#.", ".#....#.", "..####..", "........"},
      {"........", ".######.", "......#.", ".....#..", "....#...", "...#....", "...#....", "........"},
      {"........", "..####..", ".#....#.", "..####..", ".#....#.", ".#....#.", "..####..", "........"},
      {"........", "..####..", ".#....#.", ".#....#.", "..#####.", "......#.", "..####..", "........"},
  }};
  return g;
}

inline std::shared_ptr<const Schema> synth_schema() {
  static const std::shared_ptr<const Schema> schema = [] {
    Schema s;
    s.name = "synth_colored";
    static const char* channels = "rgb";
    for (std::size_t c = 0; c < 3; ++c) {
      for (std::size_t p = 0; p < kGlyphPixels; ++p) {
        FeatureSpec f;
        f.name = std::string(1, channels[c]) + std::to_string(p / kGlyphSide) + "_" + std::to_string(p % kGlyphSide);
        f.kind = FeatureKind::kBinary;
        s.features.push_back(std::move(f));
      }
    }
    s.sensitive = {"color", {"red", "green", "blue"}, {}, std::nullopt};
    LabelSpec task{"glyph", {}, {}, std::nullopt};
    for (std::size_t k = 0; k < kGlyphClasses; ++k) task.levels.push_back(std::to_string(k));
    s.task = task;
    return std::make_shared<const Schema>(std::move(s));
  }();
  return schema;
}

// n images with intensities in [0, 1]: glyph strokes at 0.7 to 1.0 in the
// chosen color channel, shifted by up to one pixel, plus uniform noise of
// amplitude 0.1 on every channel.
inline Dataset synth_colored(std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ContractError("synth_colored: n must be >= 1");
  Dataset d;
  d.schema = synth_schema();
  d.split = "synthetic";
  d.n = n;
  const std::size_t w = 3 * kGlyphPixels;
  d.x.assign(n * w, 0.0);
  Rng rng(seed);
  const auto& glyphs = glyph_bitmaps();
  for (std::size_t i = 0; i < n; ++i) {
    const int t = static_cast<int>(rng.below(kGlyphClasses));
    const int s = static_cast<int>(rng.below(3));
    const int dx = static_cast<int>(rng.below(3)) - 1;
    const int dy = static_cast<int>(rng.below(3)) - 1;
    double* img = d.x.data() + i * w;
    for (std::size_t r = 0; r < kGlyphSide; ++r) {
      for (std::size_t c = 0; c < kGlyphSide; ++c) {
        const int sr = static_cast<int>(r) - dy, sc = static_cast<int>(c) - dx;
        const bool on = sr >= 0 && sr < int(kGlyphSide) && sc >= 0 && sc < int(kGlyphSide) &&
                        glyphs[t][sr][sc] == '#';
        const double stroke = on ? 0.7 + 0.3 * rng.uniform() : 0.0;
        for (std::size_t ch = 0; ch < 3; ++ch) {
          const double v = (ch == static_cast<std::size_t>(s) ? stroke : 0.0) + 0.1 * rng.uniform();
          img[ch * kGlyphPixels + r * kGlyphSide + c] = std::min(v, 1.0);
        }
      }
    }
    d.s.push_back(s);
    d.t.push_back(t);
    d.source_rows.push_back(i);
  }
  d.targets = d.x;
  return d;
}

// Deterministic row subset (used for train/test partitions of generated data).
inline Dataset subset(const Dataset& d, const std::vector<std::size_t>& rows, std::string split) {
  Dataset out;
  out.schema = d.schema;
  out.split = std::move(split);
  out.n = rows.size();
  const std::size_t w = d.width(), tw = d.schema->target_width();
  for (std::size_t i : rows) {
    if (i >= d.n) throw ContractError("subset: row out of range");
    out.x.insert(out.x.end(), d.x.begin() + i * w, d.x.begin() + (i + 1) * w);
    out.targets.insert(out.targets.end(), d.targets.begin() + i * tw, d.targets.begin() + (i + 1) * tw);
    out.s.push_back(d.s[i]);
    if (d.has_task()) out.t.push_back(d.t[i]);
    out.source_rows.push_back(d.source_rows[i]);
  }
  return out;
}

// Splits generated data into train/test by a seeded permutation.
inline std::pair<Dataset, Dataset> split_dataset(const Dataset& d, double train_fraction, std::uint64_t seed) {
  std::vector<std::size_t> perm(d.n);
  for (std::size_t i = 0; i < d.n; ++i) perm[i] = i;
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(perm));
  const std::size_t n_train = train_count(d.n, train_fraction);
  std::vector<std::size_t> tr(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> te(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
  std::sort(tr.begin(), tr.end());
  std::sort(te.begin(), te.end());
  return {subset(d, tr, "train"), subset(d, te, "test")};
}

}  // namespace vpf::data
