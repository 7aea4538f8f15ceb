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

// Training loop, multiplier sweeps, and the sweep report.

#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "vpf/audit.hpp"
#include "vpf/data.hpp"
#include "vpf/distributions.hpp"
#include "vpf/error.hpp"
#include "vpf/estimators.hpp"
#include "vpf/export.hpp"
#include "vpf/objectives.hpp"
#include "vpf/optim.hpp"
#include "vpf/rng.hpp"

namespace vpf::train {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Multiplier schedules and rank correlation.

inline std::vector<double> log_spaced(double lo, double hi, std::size_t count) {
  if (!(lo > 0.0) || !(hi >= lo) || count == 0) throw ConfigError("log_spaced: need 0 < lo <= hi and count >= 1");
  if (count == 1) return {lo};
  std::vector<double> v(count);
  const double a = std::log(lo), b = std::log(hi);
  for (std::size_t i = 0; i < count; ++i) v[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(count - 1));
  v.front() = lo;
  v.back() = hi;
  return v;
}

inline std::vector<double> linear_spaced(double lo, double hi, std::size_t count) {
  if (!(hi >= lo) || count == 0) throw ConfigError("linear_spaced: need lo <= hi and count >= 1");
  if (count == 1) return {lo};
  std::vector<double> v(count);
  for (std::size_t i = 0; i < count; ++i) v[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
  v.back() = hi;
  return v;
}

// Ranks starting at 1; tied values share their average rank.
inline std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = rank;
    i = j + 1;
  }
  return r;
}

// Pearson correlation of average ranks.
inline double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DimensionError("spearman: series lengths differ");
  if (x.size() < 2) throw UndefinedMetricError("spearman: need at least two points");
  const auto rx = average_ranks(x), ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw UndefinedMetricError("spearman: constant series");
  return sxy / std::sqrt(sxx * syy);
}

// ---------------------------------------------------------------------------
// Configuration.

// Seeds of every random stream in a run, derived from the single run seed.
struct Seeds {
  std::uint64_t init, shuffle, noise, encode, mine, audit;

  explicit Seeds(std::uint64_t seed)
      : init(seed), shuffle(seed + 1), noise(seed + 2), encode(seed + 3), mine(seed + 4), audit(seed + 5) {}

  json to_json() const {
    return {{"init", init}, {"shuffle", shuffle}, {"noise", noise}, {"encode", encode}, {"mine", mine}, {"audit", audit}};
  }
};

struct TrainConfig {
  std::string name = "run";
  std::string preset = "desk";  // "paper" or "desk"
  std::string dataset = "adult";
  json data = json::object();  // dataset locator, interpreted by the CLI
  std::size_t epochs = 50;
  double learning_rate = 1e-3;
  std::size_t batch_size = 1024;
  std::vector<double> multipliers;
  json multiplier_schedule = json::array();  // as written in the config file
  std::uint64_t seed = 2020;
  model::ModelConfig model = model::cfb(1.0);
  est::MineConfig mine = est::MineConfig::desk();
  bool run_mine = true;
  bool run_audit = true;
  data::Encoding encoding = data::Encoding::kSampled;  // representations fed to MINE and the audit

  void validate() const {
    if (preset != "paper" && preset != "desk") throw ConfigError("preset must be 'paper' or 'desk', got '" + preset + "'");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    for (double m : multipliers) {
      if (!(m > 0.0) || !std::isfinite(m)) throw ConfigError("multipliers must be positive and finite");
    }
    model.validate();
    mine.validate();
  }

  json to_json() const {
    return {{"name", name},
            {"preset", preset},
            {"dataset", dataset},
            {"data", data},
            {"epochs", epochs},
            {"learning_rate", learning_rate},
            {"batch_size", batch_size},
            {"multipliers", multipliers},
            {"multiplier_schedule", multiplier_schedule},
            {"seed", seed},
            {"model", model.to_json()},
            {"mine", mine.to_json()},
            {"run_mine", run_mine},
            {"run_audit", run_audit},
            {"encoding", encoding == data::Encoding::kMean ? "mean" : "sampled"}};
  }

  std::string hash() const { return data::hex64(data::fnv1a(to_json().dump())); }
};

// Sets the swept multiplier: delta (the MMD weight) for vfae, otherwise the
// Lagrange multiplier.
inline model::ModelConfig with_multiplier(model::ModelConfig c, double m) {
  if (c.kind == "vfae") {
    c.mmd_weight = m;
  } else {
    c.multiplier = m;
  }
  return c;
}

inline double swept_multiplier(const model::ModelConfig& c) { return c.kind == "vfae" ? c.mmd_weight : c.multiplier; }

// Defaults per dataset and preset. Paper presets follow the published
// hyperparameter tables; desk presets cut epochs and MINE cost.
inline TrainConfig preset_config(const std::string& dataset, const std::string& kind, const std::string& preset) {
  TrainConfig c;
  c.dataset = dataset;
  c.preset = preset;
  const bool paper = preset == "paper";
  if (preset != "paper" && preset != "desk") throw ConfigError("preset must be 'paper' or 'desk', got '" + preset + "'");
  const bool fairness = kind == "cfb" || kind == "vib" || kind == "vfae";
  if (dataset == "adult") {
    c.epochs = paper ? 150 : 50;
    c.learning_rate = 1e-3;
    c.batch_size = 1024;
    c.multipliers = log_spaced(1.0, 50.0, 30);
    c.multiplier_schedule = {{"spacing", "log"}, {"low", 1.0}, {"high", 50.0}, {"count", 30}};
    c.mine = paper ? est::MineConfig::paper(2048) : est::MineConfig::desk();
  } else if (dataset == "compas") {
    c.epochs = paper ? (fairness ? 150 : 250) : 50;
    c.learning_rate = 1e-4;
    c.batch_size = 64;
    const double hi = fairness ? 50.0 : 500.0;
    c.multipliers = log_spaced(1.0, hi, 30);
    c.multiplier_schedule = {{"spacing", "log"}, {"low", 1.0}, {"high", hi}, {"count", 30}};
    c.mine = paper ? est::MineConfig::paper(463) : est::MineConfig::desk();
  } else if (dataset == "synthetic") {
    c.epochs = paper ? 100 : 15;
    c.learning_rate = 1e-3;
    c.batch_size = 128;
    c.multipliers = log_spaced(1.0, 50.0, 5);
    c.multiplier_schedule = {{"spacing", "log"}, {"low", 1.0}, {"high", 50.0}, {"count", 5}};
    c.mine = est::MineConfig::desk();
    c.mine.iterations = paper ? 20000 : 2000;
  } else {
    throw ConfigError("unknown dataset '" + dataset + "' (expected adult, compas or synthetic)");
  }
  c.model = model::config_for(kind, kind == "vfae" ? c.batch_size : 1.0);
  if (kind == "vfae") {
    // delta in [N_batch, 1000 N_batch], linearly spaced.
    const double b = static_cast<double>(c.batch_size);
    c.multipliers = linear_spaced(b, 1000.0 * b, 30);
    c.multiplier_schedule = {{"spacing", "linear"}, {"low", b}, {"high", 1000.0 * b}, {"count", 30}};
  } else if (kind == "ppvae" || kind == "beta_vae" || kind == "vib") {
    c.multipliers = linear_spaced(1.0, 50.0, 30);
    c.multiplier_schedule = {{"spacing", "linear"}, {"low", 1.0}, {"high", 50.0}, {"count", 30}};
  }
  return c;
}

inline std::vector<double> schedule_from_json(const json& j) {
  if (j.is_array()) return j.get<std::vector<double>>();
  if (j.is_number()) return {j.get<double>()};
  const std::string spacing = j.at("spacing").get<std::string>();
  const double lo = j.at("low").get<double>(), hi = j.at("high").get<double>();
  const std::size_t count = j.at("count").get<std::size_t>();
  if (spacing == "log") return log_spaced(lo, hi, count);
  if (spacing == "linear") return linear_spaced(lo, hi, count);
  throw ConfigError("multipliers.spacing must be 'log' or 'linear'");
}

// Config file layout:
//   {"name", "preset", "dataset", "seed", "data": {...},
//    "model": {"kind", ...}, "train": {"epochs", "learning_rate", "batch_size"},
//    "multipliers": [..] | {"spacing", "low", "high", "count"},
//    "mine": {...}, "run_mine", "run_audit", "encoding": "sampled" | "mean"}
// Fields left out take the preset defaults for the dataset and model kind.
inline TrainConfig config_from_json(const json& j) {
  try {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    const std::string dataset = j.value("dataset", std::string("adult"));
    const std::string preset = j.value("preset", std::string("desk"));
    const json mj = j.value("model", json::object());
    const std::string kind = mj.value("kind", std::string("cfb"));
    TrainConfig c = preset_config(dataset, kind, preset);
    c.name = j.value("name", c.name);
    c.seed = j.value("seed", c.seed);
    c.data = j.value("data", json::object());
    if (!mj.empty()) {
      json m = mj;
      if (!m.contains("multiplier") && kind != "vfae") m["multiplier"] = c.multipliers.empty() ? 1.0 : c.multipliers.front();
      c.model = model::config_from_json(m);
      if (kind == "vfae" && !mj.contains("mmd_weight")) c.model.mmd_weight = static_cast<double>(c.batch_size);
    }
    if (j.contains("train")) {
      const json& t = j.at("train");
      c.epochs = t.value("epochs", c.epochs);
      c.learning_rate = t.value("learning_rate", c.learning_rate);
      c.batch_size = t.value("batch_size", c.batch_size);
    }
    if (j.contains("multipliers")) {
      c.multiplier_schedule = j.at("multipliers");
      c.multipliers = schedule_from_json(j.at("multipliers"));
    }
    if (j.contains("mine")) c.mine = est::mine_config_from_json(j.at("mine"), c.mine);
    c.run_mine = j.value("run_mine", c.run_mine);
    c.run_audit = j.value("run_audit", c.run_audit);
    if (j.contains("encoding")) {
      const auto e = j.at("encoding").get<std::string>();
      if (e != "mean" && e != "sampled") throw ConfigError("encoding must be 'mean' or 'sampled'");
      c.encoding = e == "mean" ? data::Encoding::kMean : data::Encoding::kSampled;
    }
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Training.

struct EpochStats {
  std::size_t epoch = 0;
  double kl = 0.0, recon = 0.0, mmd = 0.0, total = 0.0;  // row-weighted means over the epoch

  json to_json() const { return {{"epoch", epoch}, {"kl", kl}, {"recon", recon}, {"mmd", mmd}, {"total", total}}; }
};

// Passed to the step observer before the parameter update.
struct StepView {
  std::size_t epoch;
  std::size_t step;  // global step index
  const data::Batch& batch;
  const dist::NoiseSource& noise_before;  // noise state used by this step's loss
  const model::LossBreakdown& loss;
};

struct TrainResult {
  std::vector<EpochStats> history;
  std::size_t steps = 0;
};

// Adam on shuffled minibatches; the last short batch of an epoch is kept.
inline TrainResult train(model::ModelGraph& m, const data::Dataset& d, const TrainConfig& cfg,
                         dist::NoiseSource& noise, const std::function<void(const StepView&)>& on_step = {}) {
  if (d.schema->hash() != m.schema().hash()) {
    throw SchemaError("train: dataset schema " + d.schema->name + " does not match the model schema");
  }
  if (d.n == 0) throw ContractError("train: empty dataset");
  if (cfg.batch_size == 0) throw ConfigError("train: batch_size must be positive");
  TrainResult result;
  nn::AdamState state = nn::AdamState::for_parameters(m.parameters());
  Rng shuffle(Seeds(cfg.seed).shuffle);
  std::vector<std::size_t> order(d.n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle.shuffle(std::span<std::size_t>(order));
    EpochStats stats;
    stats.epoch = epoch;
    for (std::size_t start = 0, step_in_epoch = 0; start < d.n; start += cfg.batch_size, ++step_in_epoch) {
      const std::size_t end = std::min(d.n, start + cfg.batch_size);
      const data::Batch batch = data::make_batch(d, std::span<const std::size_t>(order).subspan(start, end - start));
      const std::string where =
          "epoch " + std::to_string(epoch) + ", step " + std::to_string(step_in_epoch) + " (global " +
          std::to_string(result.steps) + ")";
      try {
        const dist::NoiseSource before = noise;
        ad::Tape tape;
        const model::LossBreakdown loss = model::variational_loss(m, batch, noise);
        if (on_step) on_step(StepView{epoch, result.steps, batch, before, loss});
        nn::adam_step(m.parameters(), tape.backward(loss.objective), state, cfg.learning_rate);
        const double w = static_cast<double>(end - start);
        stats.kl += w * loss.kl;
        stats.recon += w * loss.recon;
        stats.mmd += w * loss.mmd;
        stats.total += w * loss.total;
      } catch (const NumericError& e) {
        throw NumericError("training diverged at " + where + ": " + e.what());
      }
      ++result.steps;
    }
    const double n = static_cast<double>(d.n);
    stats.kl /= n;
    stats.recon /= n;
    stats.mmd /= n;
    stats.total /= n;
    result.history.push_back(stats);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Sweeps.

struct SweepRow {
  double multiplier = 0.0;
  std::string status = "ok";  // "ok" or "failed"
  std::string error;
  std::optional<EpochStats> final_epoch;
  std::optional<est::BoundReport> bounds;  // on the test split
  std::optional<double> mine_nats;         // I(S;Y) on the test split
  std::optional<audit::AuditRow> audit;
  double seconds = 0.0;  // wall clock; kept out of the CSV and JSON

  json to_json() const;
};

inline json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

inline json metrics_json(const audit::PredictorMetrics& m) {
  return {{"accuracy_t", optional_json(m.accuracy_t)},
          {"accuracy_s", m.accuracy_s},
          {"discrimination", optional_json(m.discrimination)},
          {"error_gap", optional_json(m.error_gap)},
          {"equalized_odds_gap", optional_json(m.equalized_odds_gap)}};
}

inline json SweepRow::to_json() const {
  json j;
  j["multiplier"] = multiplier;
  j["status"] = status;
  j["error"] = error.empty() ? json(nullptr) : json(error);
  j["final_epoch"] = final_epoch ? final_epoch->to_json() : json(nullptr);
  j["bounds"] = bounds ? bounds->to_json() : json(nullptr);
  j["mine_isy_nats"] = optional_json(mine_nats);
  j["mine_isy_bits"] = mine_nats ? json(*mine_nats / est::kNatsPerBit) : json(nullptr);
  if (audit) {
    j["audit"] = {{"lr", metrics_json(audit->lr)},
                  {"rf", metrics_json(audit->rf)},
                  {"prior", {{"accuracy_t", optional_json(audit->prior_accuracy_t)}, {"accuracy_s", audit->prior_accuracy_s}}}};
  } else {
    j["audit"] = nullptr;
  }
  return j;
}

struct SweepReport {
  TrainConfig config;
  std::vector<SweepRow> rows;

  json to_json() const {
    json j;
    j["name"] = config.name;
    j["preset"] = config.preset;
    j["seed"] = config.seed;
    j["seeds"] = Seeds(config.seed).to_json();
    j["config_hash"] = config.hash();
    j["config"] = config.to_json();
    j["notes"] = json::array(
        {"Multiplier schedules use 30 points unless the config lists them; the count is an assumption for the "
         "log-spaced schedules.",
         "Information terms are in nats; *_bits columns divide by ln 2.",
         "Auditors are fit on training-split representations and scored on test-split representations."});
    j["rows"] = json::array();
    for (const auto& r : rows) j["rows"].push_back(r.to_json());
    return j;
  }
};

inline const std::vector<std::string>& sweep_csv_columns() {
  static const std::vector<std::string> cols = {
      "multiplier", "preset", "seed", "config_hash", "status", "error",
      "kl", "recon", "mmd", "total",
      "ixy_upper_nats", "neg_h_x_given_sy_nats", "ity_given_s_nats", "mine_isy_nats", "mine_isy_bits",
      "lr_acc_t", "lr_acc_s", "lr_discrimination", "lr_error_gap", "lr_eo_gap",
      "rf_acc_t", "rf_acc_s", "rf_discrimination", "rf_error_gap", "rf_eo_gap",
      "prior_acc_t", "prior_acc_s"};
  return cols;
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

inline std::string csv_row(const SweepRow& r, const TrainConfig& cfg) {
  auto num = [](const std::optional<double>& v) { return v ? data::format_double(*v) : std::string(); };
  std::vector<std::string> f = {data::format_double(r.multiplier), cfg.preset, std::to_string(cfg.seed), cfg.hash(),
                                r.status, csv_escape(r.error)};
  if (r.final_epoch) {
    for (double v : {r.final_epoch->kl, r.final_epoch->recon, r.final_epoch->mmd, r.final_epoch->total}) {
      f.push_back(data::format_double(v));
    }
  } else {
    f.insert(f.end(), 4, "");
  }
  if (r.bounds) {
    f.push_back(data::format_double(r.bounds->ixy_upper));
    f.push_back(num(r.bounds->neg_h_x_given_sy));
    f.push_back(num(r.bounds->ity_given_s_lower_offset));
  } else {
    f.insert(f.end(), 3, "");
  }
  f.push_back(num(r.mine_nats));
  f.push_back(r.mine_nats ? data::format_double(*r.mine_nats / est::kNatsPerBit) : "");
  for (const audit::PredictorMetrics* m : {r.audit ? &r.audit->lr : nullptr, r.audit ? &r.audit->rf : nullptr}) {
    if (m) {
      f.insert(f.end(), {num(m->accuracy_t), data::format_double(m->accuracy_s), num(m->discrimination),
                         num(m->error_gap), num(m->equalized_odds_gap)});
    } else {
      f.insert(f.end(), 5, "");
    }
  }
  f.push_back(r.audit ? num(r.audit->prior_accuracy_t) : "");
  f.push_back(r.audit ? data::format_double(r.audit->prior_accuracy_s) : "");
  std::string line;
  for (std::size_t i = 0; i < f.size(); ++i) line += (i ? "," : "") + f[i];
  return line;
}

// One full run at a single multiplier: fresh model, training, bound report,
// MINE and audit on sampled (or mean) representations. Failures are stored
// in the row.
inline SweepRow run_point(const TrainConfig& base, double multiplier, const data::Dataset& train_set,
                          const data::Dataset& test_set, std::ostream* log = nullptr) {
  const auto t0 = std::chrono::steady_clock::now();
  SweepRow row;
  row.multiplier = multiplier;
  const Seeds seeds(base.seed);
  try {
    TrainConfig cfg = base;
    cfg.model = with_multiplier(base.model, multiplier);
    model::ModelGraph m(cfg.model, train_set.schema, seeds.init);
    dist::NoiseSource noise(seeds.noise);
    const TrainResult tr = train(m, train_set, cfg, noise);
    if (!tr.history.empty()) row.final_epoch = tr.history.back();
    dist::NoiseSource bound_noise(seeds.encode);
    row.bounds = est::bound_report(m, test_set, bound_noise);
    if (cfg.run_mine || cfg.run_audit) {
      dist::NoiseSource enc(seeds.encode + 1);
      const data::Representations rtest = data::encode_dataset(m, test_set, cfg.encoding, enc);
      if (cfg.run_audit) {
        const data::Representations rtrain = data::encode_dataset(m, train_set, cfg.encoding, enc);
        row.audit = audit::audit_row(rtrain.audit_set(), rtest.audit_set(), seeds.audit);
      }
      if (cfg.run_mine) {
        const est::Samples y = est::Samples::from(rtest.y, rtest.rows, rtest.dim);
        const est::Samples s = est::Samples::one_hot(rtest.s, test_set.schema->sensitive_levels());
        row.mine_nats = est::mine_estimate(s, y, cfg.mine, seeds.mine).nats;
      }
    }
  } catch (const Error& e) {
    row.status = "failed";
    row.error = e.what();
  }
  row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (log) {
    *log << "multiplier " << data::format_double(multiplier) << ": " << row.status
         << (row.error.empty() ? "" : " (" + row.error + ")") << ", " << row.seconds << " s\n";
    log->flush();
  }
  return row;
}

struct SweepOutputs {
  std::string csv_path;   // empty: no CSV
  std::string json_path;  // empty: no JSON
};

inline void write_json_file(const json& j, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

// Runs every multiplier in order. The CSV gains one flushed line per run and
// the JSON is rewritten after each run, so an interrupted sweep leaves
// usable partial reports.
inline SweepReport sweep(const TrainConfig& cfg, const data::Dataset& train_set, const data::Dataset& test_set,
                         const SweepOutputs& out = {}, std::ostream* log = nullptr) {
  cfg.validate();
  if (cfg.multipliers.empty()) throw ConfigError("sweep: empty multiplier list");
  SweepReport report;
  report.config = cfg;
  std::ofstream csv;
  if (!out.csv_path.empty()) {
    csv.open(out.csv_path, std::ios::binary);
    if (!csv) throw IoError("cannot write " + out.csv_path);
    const auto& cols = sweep_csv_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) csv << (i ? "," : "") << cols[i];
    csv << '\n' << std::flush;
  }
  for (double m : cfg.multipliers) {
    report.rows.push_back(run_point(cfg, m, train_set, test_set, log));
    if (csv.is_open()) {
      csv << csv_row(report.rows.back(), cfg) << '\n' << std::flush;
      if (!csv) throw IoError("write failed: " + out.csv_path);
    }
    if (!out.json_path.empty()) write_json_file(report.to_json(), out.json_path);
  }
  return report;
}

}  // namespace vpf::train
