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

// The `vpf` command line: train, sweep, audit, mi, oracle, synth, export and
// report. Every command writes its artifacts under one output prefix, with a
// log file and a run manifest beside them.

#pragma once

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "vpf/audit.hpp"
#include "vpf/data.hpp"
#include "vpf/error.hpp"
#include "vpf/estimators.hpp"
#include "vpf/exactinfo.hpp"
#include "vpf/export.hpp"
#include "vpf/objectives.hpp"
#include "vpf/trainer.hpp"

namespace vpf::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kOutputRootEnv = "VPF_OUTPUT_ROOT";

// 0 success, 1 domain failure (undefined metric, divergence, failed
// identity), 2 usage, configuration, schema or I/O error.
inline int exit_code_for(const std::exception& e) {
  return dynamic_cast<const DomainError*>(&e) != nullptr ? 1 : 2;
}

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::string file_hash(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return "";
  std::ostringstream ss;
  ss << in.rdbuf();
  return data::hex64(data::fnv1a(ss.str()));
}

// Relative prefixes are placed under $VPF_OUTPUT_ROOT when it is set.
inline fs::path resolve_prefix(const std::string& out) {
  fs::path p(out);
  if (p.is_relative()) {
    if (const char* root = std::getenv(kOutputRootEnv); root && *root) p = fs::path(root) / p;
  }
  if (p.filename().empty()) throw ConfigError("--out must name a file prefix, got '" + out + "'");
  return p;
}

// One command invocation: the log, the declared outputs and the manifest.
class Session {
 public:
  Session(std::string command, std::vector<std::string> argv, const std::string& out)
      : command_(std::move(command)), argv_(std::move(argv)), prefix_(resolve_prefix(out)),
        started_(utc_timestamp()), t0_(std::chrono::steady_clock::now()) {
    if (prefix_.has_parent_path()) {
      std::error_code ec;
      fs::create_directories(prefix_.parent_path(), ec);
      if (ec) throw IoError("cannot create directory " + prefix_.parent_path().string() + ": " + ec.message());
    }
    log_.open(path_string(".log"), std::ios::binary);
    if (!log_) throw IoError("cannot write " + path_string(".log"));
  }

  std::string path_string(const std::string& suffix) const { return prefix_.string() + suffix; }

  // Declares an artifact and returns its path.
  std::string output(const std::string& suffix) {
    const std::string p = path_string(suffix);
    outputs_.push_back(p);
    return p;
  }

  void input(const std::string& path) { inputs_.push_back(path); }

  void info(const std::string& msg) {
    std::cerr << msg << '\n';
    log_ << msg << '\n';
    log_.flush();
  }

  json& meta() { return meta_; }

  void finish(int status, const std::string& error = "") {
    json m;
    m["tool"] = "vpf";
    m["version"] = kVersion;
    m["command"] = command_;
    m["argv"] = argv_;
    m["cwd"] = fs::current_path().string();
    if (const char* root = std::getenv(kOutputRootEnv)) m["output_root"] = root;
    m["status"] = status;
    if (!error.empty()) m["error"] = error;
    for (auto& [k, v] : meta_.items()) m[k] = v;
    m["inputs"] = json::array();
    for (const auto& p : inputs_) m["inputs"].push_back({{"path", p}, {"fnv1a", file_hash(p)}});
    m["outputs"] = json::array();
    for (const auto& p : outputs_) {
      if (fs::exists(p)) m["outputs"].push_back({{"path", p}, {"fnv1a", file_hash(p)}});
    }
    m["log"] = path_string(".log");
    m["started_at"] = started_;
    m["finished_at"] = utc_timestamp();
    m["wall_clock_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    std::ofstream out(path_string(".manifest.json"), std::ios::binary);
    out << m.dump(2) << '\n';
    if (!out) std::cerr << "vpf: cannot write manifest " << path_string(".manifest.json") << '\n';
  }

 private:
  std::string command_;
  std::vector<std::string> argv_;
  fs::path prefix_;
  std::string started_;
  std::chrono::steady_clock::time_point t0_;
  std::ofstream log_;
  std::vector<std::string> inputs_, outputs_;
  json meta_ = json::object();
};

// ---------------------------------------------------------------------------
// Datasets named by a config's "data" block.
//
//   {"kind": "synthetic", "n": 8000, "seed": 2020, "train_fraction": 0.7}
//   {"kind": "tabular", "schema": "../adult_schema.json",
//    "train": path | null, "test": path | null,
//    "train_env": "VPF_ADULT_TRAIN", "test_env": "VPF_ADULT_TEST",
//    "train_fraction": 0.7, "split_seed": 2020}
//
// Relative paths in the block are resolved against the config file's
// directory; --data / --test-data override "train" / "test".

struct DataOverrides {
  std::string train, test;
};

struct LoadedData {
  data::Dataset train, test;
  std::vector<std::string> inputs;
  json description;
};

inline std::string from_config_dir(const fs::path& dir, const std::string& p) {
  fs::path q(p);
  return q.is_relative() ? (dir / q).lexically_normal().string() : q.string();
}

inline LoadedData load_data(const train::TrainConfig& cfg, const fs::path& config_dir, const DataOverrides& o) {
  const json& block = cfg.data;
  const std::string kind = block.value("kind", cfg.dataset == "synthetic" ? std::string("synthetic") : std::string("tabular"));
  const double fraction = block.value("train_fraction", 0.7);
  LoadedData out;
  if (kind == "synthetic") {
    const std::size_t n = block.value("n", std::size_t{8000});
    const std::uint64_t seed = block.value("seed", cfg.seed);
    const std::uint64_t split_seed = block.value("split_seed", cfg.seed);
    auto [tr, te] = data::split_dataset(data::synth_colored(n, seed), fraction, split_seed);
    out.train = std::move(tr);
    out.test = std::move(te);
    out.description = {{"kind", "synthetic"}, {"n", n}, {"seed", seed}, {"train_fraction", fraction}, {"split_seed", split_seed}};
    return out;
  }
  if (kind != "tabular") throw ConfigError("data.kind must be 'synthetic' or 'tabular', got '" + kind + "'");
  auto locate = [&](const std::string& override_path, const char* key, const char* env_key) -> std::string {
    if (!override_path.empty()) return override_path;
    if (block.contains(key) && block.at(key).is_string()) return from_config_dir(config_dir, block.at(key).get<std::string>());
    if (block.contains(env_key)) {
      const std::string var = block.at(env_key).get<std::string>();
      if (const char* v = std::getenv(var.c_str()); v && *v) return v;
    }
    return "";
  };
  const std::string train_path = locate(o.train, "train", "train_env");
  const std::string test_path = locate(o.test, "test", "test_env");
  if (train_path.empty()) {
    std::string hint = block.contains("train_env") ? " or $" + block.at("train_env").get<std::string>() : "";
    throw ConfigError("no training data: set data.train in the config, pass --data" + hint);
  }
  if (!block.contains("schema")) throw ConfigError("data.schema is required for tabular data");
  const std::string schema_path = from_config_dir(config_dir, block.at("schema").get<std::string>());
  const data::Schema schema = data::load_schema(schema_path);
  data::SplitSpec split;
  split.train_fraction = fraction;
  split.seed = block.value("split_seed", cfg.seed);
  if (!test_path.empty()) split.test_path = test_path;
  data::LoadedSplits s = data::load_tabular(train_path, schema, split);
  out.inputs = {schema_path, train_path};
  if (!test_path.empty()) out.inputs.push_back(test_path);
  out.description = {{"kind", "tabular"},
                     {"schema", schema.name},
                     {"schema_hash", schema.hash()},
                     {"train_fraction", fraction},
                     {"split_seed", split.seed},
                     {"rows_read", s.report.rows_read},
                     {"dropped_missing", s.report.dropped_missing},
                     {"train_rows", s.train.n},
                     {"test_rows", s.test.n}};
  out.train = std::move(s.train);
  out.test = std::move(s.test);
  return out;
}

struct LoadedConfig {
  train::TrainConfig config;
  fs::path dir;
};

inline LoadedConfig load_config(const std::string& path) {
  if (!fs::exists(path)) throw ConfigError("config file not found: " + path);
  LoadedConfig c;
  try {
    c.config = train::config_from_json(data::read_json_file(path));
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
  c.dir = fs::path(path).parent_path();
  return c;
}

// ---------------------------------------------------------------------------
// Oracle self-check over random fixtures.

struct OracleCheck {
  std::string name;
  double worst = 0.0;  // largest residual or violation seen
  double tolerance = 0.0;
  bool pass() const { return worst <= tolerance; }
};

// Random p(s,x,t) p(y|x) fixtures with random lambda and random variational
// tables. Identities are checked to 1e-9, inequalities (data processing,
// bound gaps) allow 1e-10 of negative slack.
inline std::vector<OracleCheck> oracle_self_check(std::size_t fixtures, std::uint64_t seed) {
  std::vector<OracleCheck> checks = {
      {"J_CPF(gamma=lambda+1) = L_CPF(lambda)", 0.0, 1e-9},
      {"(lambda+1) L_PF(lambda/(lambda+1)) = L_CPF(lambda)", 0.0, 1e-9},
      {"J_CFB(beta=lambda+1) = L_CFB(lambda)", 0.0, 1e-9},
      {"I(X;Y) = I(S;Y) + I(X;Y|S)", 0.0, 1e-9},
      {"I(X;Y|S) = I(T;Y|S) + I(X;Y|S,T)", 0.0, 1e-9},
      {"data processing: I(S;Y) <= I(S;X)", 0.0, 1e-10},
      {"I(X;Y) upper bound gap >= 0", 0.0, 1e-10},
      {"I(X;Y|S) lower bound gap >= 0", 0.0, 1e-10},
      {"I(T;Y|S) lower bound gap >= 0", 0.0, 1e-10},
  };
  Rng rng(seed);
  for (std::size_t i = 0; i < fixtures; ++i) {
    const std::size_t ns = 2 + rng.below(2), nx = 2 + rng.below(4), nt = 2 + rng.below(2), ny = 2 + rng.below(3);
    const info::DiscreteJoint sxt = info::random_joint(rng, {"S", "X", "T"}, {ns, nx, nt}, 0.15);
    const info::Channel ch = info::random_channel(rng, nx, ny, 0.15);
    const double lambda = rng.uniform(0.0, 50.0);
    const info::LagrangianSuite r = info::lagrangian_suite(sxt, ch, lambda);
    const info::DiscreteJoint full = info::apply_channel(sxt, ch);
    const double i_sx = info::mutual_info(full, {"S"}, {"X"});
    info::VariationalTables q;
    q.q_y = info::random_stochastic_rows(rng, 1, ny);
    q.q_x_given_sy = info::random_stochastic_rows(rng, ns * ny, nx);
    q.q_t_given_sy = info::random_stochastic_rows(rng, ns * ny, nt);
    const info::BoundGaps g = info::bound_gap(sxt, ch, q);
    const double values[] = {
        std::abs(r.j_cpf - r.l_cpf),
        std::abs((lambda + 1.0) * r.l_pf - r.l_cpf),
        std::abs(*r.j_cfb - *r.l_cfb),
        std::abs(r.i_xy - r.i_sy - r.i_xy_s),
        std::abs(r.i_xy_s - *r.i_ty_s - *r.i_xy_st),
        std::max(0.0, r.i_sy - i_sx),
        std::max(0.0, -g.ixy),
        std::max(0.0, -g.ixy_s),
        std::max(0.0, -*g.ity_s),
    };
    for (std::size_t k = 0; k < checks.size(); ++k) checks[k].worst = std::max(checks[k].worst, values[k]);
  }
  return checks;
}

// ---------------------------------------------------------------------------
// report: plot-ready projections of a sweep CSV, in bits.

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name, const std::string& path) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw SchemaError(path + ": missing column '" + name + "'");
  }
};

inline CsvTable read_plain_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  CsvTable t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = data::split_csv_line(line);
    if (t.header.empty()) {
      t.header = std::move(fields);
      continue;
    }
    if (fields.size() != t.header.size()) {
      throw SchemaError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                        " fields, got " + std::to_string(fields.size()));
    }
    t.rows.push_back(std::move(fields));
  }
  if (t.header.empty()) throw SchemaError(path + ": empty file");
  if (t.rows.empty()) throw SchemaError(path + ": no data rows");
  return t;
}

// Cell as a number; empty cells stay empty. Non-numeric text is an error.
inline std::optional<double> cell_number(const std::string& v, const std::string& where) {
  if (v.empty()) return std::nullopt;
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::logic_error&) {
    throw SchemaError(where + ": '" + v + "' is not a number");
  }
}

inline void write_report(const std::string& sweep_csv, Session& session) {
  const CsvTable t = read_plain_csv(sweep_csv);
  auto col = [&](const std::string& n) { return t.column(n, sweep_csv); };
  const std::size_t c_mult = col("multiplier"), c_status = col("status");
  auto bits = [](std::optional<double> nats) { return nats ? std::optional<double>(*nats / est::kNatsPerBit) : nats; };
  auto fmt = [](std::optional<double> v) { return v ? data::format_double(*v) : std::string(); };

  std::ofstream comp(session.output("_compression.csv"), std::ios::binary);
  std::ofstream leak(session.output("_leakage.csv"), std::ios::binary);
  std::ofstream fair(session.output("_fairness.csv"), std::ios::binary);
  if (!comp || !leak || !fair) throw IoError("cannot write report files under " + session.path_string(""));
  comp << "multiplier,ixy_upper_bits,retained_bits,retained_term\n";
  leak << "multiplier,mine_isy_bits,lr_acc_s,rf_acc_s,prior_acc_s\n";
  const std::vector<std::string> fair_cols = {"lr_acc_t", "lr_discrimination", "lr_error_gap", "lr_eo_gap",
                                              "rf_acc_t", "rf_discrimination", "rf_error_gap", "rf_eo_gap",
                                              "prior_acc_t"};
  fair << "multiplier";
  for (const auto& c : fair_cols) fair << ',' << c;
  fair << '\n';
  std::size_t used = 0;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& r = t.rows[i];
    const std::string where = sweep_csv + ":" + std::to_string(i + 2);
    const auto mult = cell_number(r[c_mult], where);
    if (!mult) throw SchemaError(where + ": empty multiplier");
    if (r[c_status] != "ok") continue;
    auto num = [&](const std::string& name) { return cell_number(r[col(name)], where); };
    const auto recon = num("neg_h_x_given_sy_nats"), pred = num("ity_given_s_nats");
    comp << fmt(mult) << ',' << fmt(bits(num("ixy_upper_nats"))) << ',' << fmt(bits(recon ? recon : pred)) << ','
         << (recon ? "neg_h_x_given_sy" : pred ? "ity_given_s" : "") << '\n';
    leak << fmt(mult) << ',' << fmt(num("mine_isy_bits")) << ',' << fmt(num("lr_acc_s")) << ','
         << fmt(num("rf_acc_s")) << ',' << fmt(num("prior_acc_s")) << '\n';
    fair << fmt(mult);
    for (const auto& c : fair_cols) fair << ',' << fmt(num(c));
    fair << '\n';
    ++used;
  }
  session.info("report: " + std::to_string(used) + " of " + std::to_string(t.rows.size()) + " rows usable");
}

// ---------------------------------------------------------------------------
// Command implementations.

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << text;
  if (!out) throw IoError("write failed: " + path);
}

inline std::string audit_csv(const audit::AuditRow& row) {
  auto num = [](const std::optional<double>& v) { return v ? data::format_double(*v) : std::string(); };
  std::string s = "predictor,acc_t,acc_s,discrimination,error_gap,eo_gap\n";
  for (const auto& [name, m] : {std::pair{"lr", &row.lr}, std::pair{"rf", &row.rf}}) {
    s += std::string(name) + "," + num(m->accuracy_t) + "," + data::format_double(m->accuracy_s) + "," +
         num(m->discrimination) + "," + num(m->error_gap) + "," + num(m->equalized_odds_gap) + "\n";
  }
  s += "prior," + num(row.prior_accuracy_t) + "," + data::format_double(row.prior_accuracy_s) + ",,,\n";
  return s;
}

struct Options {
  std::string config, data, test_data, out, input, train_reps, test_reps, checkpoint, joint, channel;
  std::string split = "test", encoding = "mean", preset = "desk";
  std::optional<double> multiplier, lambda;
  std::vector<double> multipliers;
  std::optional<std::size_t> points, iterations, batch;
  std::size_t n = 8000, fixtures = 50;
  std::uint64_t seed = 2020;
  bool self_check = false;
};

inline void cmd_train(const Options& o, Session& s) {
  const LoadedConfig lc = load_config(o.config);
  train::TrainConfig cfg = lc.config;
  if (o.multiplier) cfg.model = train::with_multiplier(cfg.model, *o.multiplier);
  s.input(o.config);
  const LoadedData d = load_data(cfg, lc.dir, {o.data, o.test_data});
  for (const auto& p : d.inputs) s.input(p);
  s.meta()["config_hash"] = cfg.hash();
  s.meta()["seeds"] = train::Seeds(cfg.seed).to_json();
  s.meta()["preset"] = cfg.preset;
  s.meta()["data"] = d.description;
  s.info("train " + cfg.model.kind + " multiplier " + data::format_double(train::swept_multiplier(cfg.model)) + " on " +
         std::to_string(d.train.n) + " rows, " + std::to_string(cfg.epochs) + " epochs (" + cfg.preset + " preset)");
  const train::Seeds seeds(cfg.seed);
  model::ModelGraph m(cfg.model, d.train.schema, seeds.init);
  dist::NoiseSource noise(seeds.noise);
  const train::TrainResult r = train::train(m, d.train, cfg, noise);
  std::string hist = "epoch,kl,recon,mmd,total\n";
  for (const auto& e : r.history) {
    hist += std::to_string(e.epoch) + "," + data::format_double(e.kl) + "," + data::format_double(e.recon) + "," +
            data::format_double(e.mmd) + "," + data::format_double(e.total) + "\n";
  }
  write_text(s.output("_history.csv"), hist);
  const std::string ckpt = s.output(".ckpt");
  s.output(".ckpt.json");
  model::save_checkpoint(m, ckpt);
  dist::NoiseSource bound_noise(seeds.encode);
  const est::BoundReport b = est::bound_report(m, d.test, bound_noise);
  json bj = b.to_json();
  bj["split"] = "test";
  bj["units"] = "nats";
  write_text(s.output("_bounds.json"), bj.dump(2) + "\n");
  if (!r.history.empty()) {
    s.info("final epoch: kl " + data::format_double(r.history.back().kl) + ", recon " +
           data::format_double(r.history.back().recon));
  }
}

inline void cmd_sweep(const Options& o, Session& s) {
  const LoadedConfig lc = load_config(o.config);
  train::TrainConfig cfg = lc.config;
  if (!o.multipliers.empty()) {
    cfg.multipliers = o.multipliers;
    cfg.multiplier_schedule = o.multipliers;
  } else if (o.points) {
    json sched = cfg.multiplier_schedule;
    if (!sched.is_object()) throw ConfigError("--points needs a {spacing, low, high, count} schedule in the config");
    sched["count"] = *o.points;
    cfg.multiplier_schedule = sched;
    cfg.multipliers = train::schedule_from_json(sched);
  }
  s.input(o.config);
  const LoadedData d = load_data(cfg, lc.dir, {o.data, o.test_data});
  for (const auto& p : d.inputs) s.input(p);
  s.meta()["config_hash"] = cfg.hash();
  s.meta()["seeds"] = train::Seeds(cfg.seed).to_json();
  s.meta()["preset"] = cfg.preset;
  s.meta()["data"] = d.description;
  s.info("sweep " + cfg.model.kind + " over " + std::to_string(cfg.multipliers.size()) + " multipliers (" +
         cfg.preset + " preset), train " + std::to_string(d.train.n) + " / test " + std::to_string(d.test.n) + " rows");
  struct Tee : std::streambuf {
    Session* session;
    std::string line;
    int overflow(int c) override {
      if (c == '\n') {
        session->info(line);
        line.clear();
      } else if (c != EOF) {
        line += static_cast<char>(c);
      }
      return c;
    }
  } tee;
  tee.session = &s;
  std::ostream log(&tee);
  const train::SweepReport rep = train::sweep(cfg, d.train, d.test, {s.output(".csv"), s.output(".json")}, &log);
  json timing = json::array();
  std::size_t failed = 0;
  for (const auto& row : rep.rows) {
    timing.push_back({{"multiplier", row.multiplier}, {"seconds", row.seconds}});
    failed += row.status != "ok";
  }
  s.meta()["row_seconds"] = timing;
  s.info("sweep finished: " + std::to_string(rep.rows.size() - failed) + " ok, " + std::to_string(failed) + " failed");
}

inline void cmd_audit(const Options& o, Session& s) {
  s.input(o.train_reps);
  s.input(o.test_reps);
  const data::Representations tr = data::read_representations(o.train_reps);
  const data::Representations te = data::read_representations(o.test_reps);
  s.meta()["seeds"] = {{"audit", o.seed}};
  const audit::AuditRow row = audit::audit_row(tr.audit_set(), te.audit_set(), o.seed);
  write_text(s.output(".csv"), audit_csv(row));
  json j;
  j["lr"] = train::metrics_json(row.lr);
  j["rf"] = train::metrics_json(row.rf);
  j["prior"] = {{"accuracy_t", train::optional_json(row.prior_accuracy_t)}, {"accuracy_s", row.prior_accuracy_s}};
  j["train_rows"] = tr.rows;
  j["test_rows"] = te.rows;
  write_text(s.output(".json"), j.dump(2) + "\n");
  s.info(audit_csv(row));
}

inline void cmd_mi(const Options& o, Session& s) {
  s.input(o.input);
  const data::Representations r = data::read_representations(o.input);
  est::MineConfig cfg = o.preset == "paper" ? est::MineConfig::paper() : est::MineConfig::desk();
  if (o.preset != "paper" && o.preset != "desk") throw ConfigError("--preset must be 'paper' or 'desk'");
  if (o.iterations) cfg.iterations = *o.iterations;
  if (o.batch) cfg.batch_size = *o.batch;
  cfg.window = std::min(cfg.window, cfg.iterations);
  const int levels = *std::max_element(r.s.begin(), r.s.end()) + 1;
  s.meta()["seeds"] = {{"mine", o.seed}};
  s.meta()["preset"] = o.preset;
  s.info("MINE on " + std::to_string(r.rows) + " samples, " + std::to_string(cfg.iterations) + " iterations, batch " +
         std::to_string(cfg.batch_size));
  const est::MiEstimate e = est::mine_estimate(est::Samples::one_hot(r.s, static_cast<std::size_t>(levels)),
                                               est::Samples::from(r.y, r.rows, r.dim), cfg, o.seed);
  json j = {{"isy_nats", e.nats}, {"isy_bits", e.bits()}, {"mine", cfg.to_json()}, {"rows", r.rows}};
  write_text(s.output(".json"), j.dump(2) + "\n");
  std::string trace = "iteration,dv_nats\n";
  for (std::size_t i = 0; i < e.trace.size(); ++i) trace += std::to_string(i) + "," + data::format_double(e.trace[i]) + "\n";
  write_text(s.output("_trace.csv"), trace);
  s.info("I(S;Y) = " + data::format_double(e.nats) + " nats (" + data::format_double(e.bits()) + " bits)");
}

// Returns false when a check fails.
inline bool cmd_oracle(const Options& o, Session& s) {
  if (o.self_check) {
    const auto checks = oracle_self_check(o.fixtures, o.seed);
    json j = json::array();
    bool ok = true;
    for (const auto& c : checks) {
      std::ostringstream line;
      line << (c.pass() ? "PASS " : "FAIL ") << c.name << "  worst " << c.worst << " (tol " << c.tolerance << ")";
      s.info(line.str());
      j.push_back({{"check", c.name}, {"worst", c.worst}, {"tolerance", c.tolerance}, {"pass", c.pass()}});
      ok = ok && c.pass();
    }
    write_text(s.output(".json"), json{{"fixtures", o.fixtures}, {"seed", o.seed}, {"checks", j}}.dump(2) + "\n");
    return ok;
  }
  if (o.joint.empty() || o.channel.empty() || !o.lambda) {
    throw ConfigError("oracle: pass --self-check, or --joint, --channel and --lambda");
  }
  s.input(o.joint);
  s.input(o.channel);
  const info::LagrangianSuite r =
      info::lagrangian_suite(info::load_joint(o.joint), info::load_channel(o.channel), *o.lambda);
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  const json j = {{"lambda", r.lambda}, {"gamma", r.gamma},   {"alpha", r.alpha},
                  {"beta", r.beta},     {"i_sy", r.i_sy},     {"i_xy", r.i_xy},
                  {"i_xy_s", r.i_xy_s}, {"i_ty_s", opt(r.i_ty_s)}, {"i_xy_st", opt(r.i_xy_st)},
                  {"l_cpf", r.l_cpf},   {"j_cpf", r.j_cpf},   {"l_pf", r.l_pf},
                  {"l_cfb", opt(r.l_cfb)}, {"j_cfb", opt(r.j_cfb)}, {"max_residual", r.max_residual()},
                  {"units", "nats"}};
  write_text(s.output(".json"), j.dump(2) + "\n");
  s.info(j.dump(2));
  return r.max_residual() <= 1e-9;
}

inline void cmd_synth(const Options& o, Session& s) {
  const data::Dataset d = data::synth_colored(o.n, o.seed);
  s.meta()["seeds"] = {{"synth", o.seed}};
  const data::Schema& schema = *d.schema;
  std::ofstream out(s.output(".csv"), std::ios::binary);
  if (!out) throw IoError("cannot write " + s.path_string(".csv"));
  for (const auto& f : schema.features) out << f.name << ',';
  out << schema.sensitive.name << ',' << schema.task->name << '\n';
  const std::size_t w = d.width();
  for (std::size_t i = 0; i < d.n; ++i) {
    for (std::size_t k = 0; k < w; ++k) out << data::format_double(d.x[i * w + k]) << ',';
    out << schema.sensitive.levels[static_cast<std::size_t>(d.s[i])] << ','
        << schema.task->levels[static_cast<std::size_t>(d.t[i])] << '\n';
  }
  if (!out) throw IoError("write failed: " + s.path_string(".csv"));
  data::Schema with_header = schema;
  with_header.header = true;
  write_text(s.output("_schema.json"), with_header.to_json().dump(2) + "\n");
  s.info("synth: " + std::to_string(d.n) + " rows, " + std::to_string(w) + " features");
}

inline void cmd_export(const Options& o, Session& s) {
  const LoadedConfig lc = load_config(o.config);
  s.input(o.config);
  s.input(o.checkpoint);
  const LoadedData d = load_data(lc.config, lc.dir, {o.data, o.test_data});
  for (const auto& p : d.inputs) s.input(p);
  if (o.split != "train" && o.split != "test") throw ConfigError("--split must be 'train' or 'test'");
  if (o.encoding != "mean" && o.encoding != "sampled") throw ConfigError("--encoding must be 'mean' or 'sampled'");
  const model::ModelGraph m = model::load_checkpoint(o.checkpoint, d.train.schema);
  dist::NoiseSource noise(o.seed);
  s.meta()["seeds"] = {{"encode", o.seed}};
  const data::Dataset& src = o.split == "train" ? d.train : d.test;
  const data::Representations r = data::export_representations(
      m, src, s.output(".csv"), o.encoding == "mean" ? data::Encoding::kMean : data::Encoding::kSampled, noise);
  s.info("export: " + std::to_string(r.rows) + " rows x " + std::to_string(r.dim) + " dims (" + o.split + ", " +
         o.encoding + ")");
}

inline void cmd_report(const Options& o, Session& s) {
  s.input(o.input);
  write_report(o.input, s);
}

// ---------------------------------------------------------------------------

inline int run(const std::vector<std::string>& args) {
  CLI::App app{"vpf: variational privacy and fairness representations", "vpf"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  Options o;
  auto out_opt = [&](CLI::App* c) {
    c->add_option("--out", o.out, "output prefix (relative to $VPF_OUTPUT_ROOT when set)");
  };
  auto data_opts = [&](CLI::App* c) {
    c->add_option("--data", o.data, "training CSV (overrides the config)");
    c->add_option("--test-data", o.test_data, "test CSV (overrides the config)");
  };

  std::map<std::string, std::string> default_out = {
      {"train", "vpf_train"}, {"sweep", "vpf_sweep"}, {"audit", "vpf_audit"}, {"mi", "vpf_mi"},
      {"oracle", "vpf_oracle"}, {"synth", "vpf_synth"}, {"export", "vpf_export"}, {"report", "vpf_report"}};
  std::map<std::string, CLI::App*> subs;

  subs["train"] = app.add_subcommand("train", "train one model and save a checkpoint");
  subs["train"]->add_option("--config", o.config, "experiment config JSON")->required();
  subs["train"]->add_option("--multiplier", o.multiplier, "override the Lagrange multiplier (delta for vfae)");
  data_opts(subs["train"]);

  subs["sweep"] = app.add_subcommand("sweep", "train and evaluate across a multiplier schedule");
  subs["sweep"]->add_option("--config", o.config, "experiment config JSON")->required();
  subs["sweep"]->add_option("--multipliers", o.multipliers, "explicit multipliers")->delimiter(',');
  subs["sweep"]->add_option("--points", o.points, "resample the config schedule with this many points");
  data_opts(subs["sweep"]);

  subs["audit"] = app.add_subcommand("audit", "fit LR/RF/prior auditors on representation dumps");
  subs["audit"]->add_option("--train", o.train_reps, "training representations CSV")->required();
  subs["audit"]->add_option("--test", o.test_reps, "test representations CSV")->required();
  subs["audit"]->add_option("--seed", o.seed);

  subs["mi"] = app.add_subcommand("mi", "estimate I(S;Y) with MINE on a representation dump");
  subs["mi"]->add_option("--input", o.input, "representations CSV")->required();
  subs["mi"]->add_option("--preset", o.preset, "desk or paper");
  subs["mi"]->add_option("--iterations", o.iterations);
  subs["mi"]->add_option("--batch", o.batch);
  subs["mi"]->add_option("--seed", o.seed);

  subs["oracle"] = app.add_subcommand("oracle", "exact information identities on discrete fixtures");
  subs["oracle"]->add_flag("--self-check", o.self_check, "run the identity suite on random fixtures");
  subs["oracle"]->add_option("--fixtures", o.fixtures);
  subs["oracle"]->add_option("--seed", o.seed);
  subs["oracle"]->add_option("--joint", o.joint, "joint table file");
  subs["oracle"]->add_option("--channel", o.channel, "channel table file");
  subs["oracle"]->add_option("--lambda", o.lambda);

  subs["synth"] = app.add_subcommand("synth", "write the synthetic colored-glyph dataset");
  subs["synth"]->add_option("--n", o.n, "rows");
  subs["synth"]->add_option("--seed", o.seed);

  subs["export"] = app.add_subcommand("export", "write representations of a dataset split");
  subs["export"]->add_option("--config", o.config, "experiment config JSON")->required();
  subs["export"]->add_option("--checkpoint", o.checkpoint, "checkpoint written by train")->required();
  subs["export"]->add_option("--split", o.split, "train or test");
  subs["export"]->add_option("--encoding", o.encoding, "mean or sampled");
  subs["export"]->add_option("--seed", o.seed);
  data_opts(subs["export"]);

  subs["report"] = app.add_subcommand("report", "plot-ready CSVs from a sweep CSV");
  subs["report"]->add_option("--input", o.input, "sweep CSV")->required();

  for (auto& [name, sub] : subs) out_opt(sub);

  if (args.size() > 1 && !args[1].empty() && args[1][0] != '-' && subs.count(args[1]) == 0) {
    std::cerr << "vpf: unknown command '" << args[1] << "'\n\n" << app.help();
    return 2;
  }
  std::vector<std::string> reversed(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    // Help and version exit 0; every usage error exits 2.
    return app.exit(e) == 0 ? 0 : 2;
  }

  std::string command;
  for (auto& [name, sub] : subs) {
    if (sub->parsed()) command = name;
  }
  if (subs[command]->count("--out") == 0) o.out = default_out[command];

  std::unique_ptr<Session> session;
  try {
    session = std::make_unique<Session>(command, args, o.out);
    int status = 0;
    if (command == "train") cmd_train(o, *session);
    else if (command == "sweep") cmd_sweep(o, *session);
    else if (command == "audit") cmd_audit(o, *session);
    else if (command == "mi") cmd_mi(o, *session);
    else if (command == "oracle") status = cmd_oracle(o, *session) ? 0 : 1;
    else if (command == "synth") cmd_synth(o, *session);
    else if (command == "export") cmd_export(o, *session);
    else if (command == "report") cmd_report(o, *session);
    session->finish(status);
    return status;
  } catch (const std::exception& e) {
    const int code = exit_code_for(e);
    const std::string msg = std::string("vpf ") + command + ": " + e.what();
    if (session) {
      session->info(msg);
      session->finish(code, e.what());
    } else {
      std::cerr << msg << '\n';
    }
    return code;
  }
}

inline int run(int argc, char** argv) { return run(std::vector<std::string>(argv, argv + argc)); }

}  // namespace vpf::cli
