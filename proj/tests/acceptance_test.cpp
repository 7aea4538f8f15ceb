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

// Acceptance runner. Prints one PASS / FAIL / SKIP line per criterion and
// exits non-zero if any criterion fails. Pass criterion numbers to run a
// subset, e.g. `acceptance_test 2 9`.
//
// Environment:
//   VPF_ADULT_TRAIN, VPF_ADULT_TEST  UCI Adult adult.data / adult.test; the
//                                    Adult criteria are skipped without them
//   VPF_ACCEPT_REDUCED=1             5-point Adult CPF sweep instead of 30

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fd_check.hpp"
#include "random_graphs.hpp"
#include "vpf/cli.hpp"

namespace {

using namespace vpf;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

enum class Status { kPass, kFail, kSkip };

struct Outcome {
  Status status = Status::kPass;
  std::string detail;
};

class Checks {
 public:
  void expect(bool ok, const std::string& what) {
    notes_.push_back((ok ? "" : "[x] ") + what);
    ok_ = ok_ && ok;
  }
  Outcome outcome() const {
    std::string d;
    for (const auto& n : notes_) d += (d.empty() ? "" : "; ") + n;
    return {ok_ ? Status::kPass : Status::kFail, d};
  }

 private:
  bool ok_ = true;
  std::vector<std::string> notes_;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// ---------------------------------------------------------------------------
// 1. Autodiff gradient suite.

Outcome autodiff_suite() {
  const auto t0 = Clock::now();
  Rng rng(2020);
  constexpr int kGraphs = 200;
  double worst = 0.0;
  std::size_t entries = 0;
  int bad = 0;
  for (int i = 0; i < kGraphs; ++i) {
    testing::RandomGraph g = testing::random_graph(rng, 6);
    const testing::GradCheck r = testing::check_gradients(g.leaves, g.loss);
    worst = std::max(worst, r.max_rel_error);
    entries += r.checked;
    bad += r.max_rel_error > 1e-4;
  }
  const double secs = seconds_since(t0);
  Checks c;
  c.expect(bad == 0, std::to_string(kGraphs - bad) + "/" + std::to_string(kGraphs) +
                         " random compositions within 1e-4 (" + std::to_string(entries) +
                         " partials, worst rel err " + fmt(worst, 2) + ")");
  c.expect(secs < 30.0, "runtime " + fmt(secs, 3) + " s < 30 s");
  return c.outcome();
}

// ---------------------------------------------------------------------------
// 2. Oracle identity suite.

Outcome oracle_suite() {
  const auto t0 = Clock::now();
  const auto checks = cli::oracle_self_check(50, 2020);
  const double secs = seconds_since(t0);
  Checks c;
  for (const auto& k : checks) c.expect(k.pass(), k.name + " worst " + fmt(k.worst, 2));
  c.expect(secs < 10.0, "50 fixtures in " + fmt(secs, 3) + " s < 10 s");
  return c.outcome();
}

// ---------------------------------------------------------------------------
// 3. KL / NLL closed forms.

// E_p[log p(y) - log q(y)] for p = N(mu, s^2), q = N(0, 1), one dimension
// at a time, from the log-densities directly.
double mc_kl(const std::vector<double>& mu, double sigma, std::size_t samples, std::uint64_t seed) {
  Rng rng(seed);
  double acc = 0.0;
  for (std::size_t i = 0; i < samples; ++i) {
    for (double m : mu) {
      const double e = rng.normal();
      const double y = m + sigma * e;
      acc += (-0.5 * e * e - std::log(sigma)) - (-0.5 * y * y);
    }
  }
  return acc / static_cast<double>(samples);
}

Outcome closed_forms() {
  using ad::Tensor;
  Checks c;
  constexpr std::size_t kSamples = 1'000'000;
  struct Case {
    std::vector<double> mu;
    double log_sigma;
  };
  const Case cases[] = {{{0.0}, 1.0}, {{0.7, -1.2}, -0.4}, {{2.0, 0.5, -0.3}, 0.3}};
  std::uint64_t seed = 31;
  for (const auto& k : cases) {
    const std::size_t d = k.mu.size();
    const dist::GaussianHead head{Tensor::from({1, d}, k.mu), Tensor::scalar(k.log_sigma)};
    const double closed = dist::gaussian_kl_to_standard(head)[0];
    const double mc = mc_kl(k.mu, std::exp(k.log_sigma), kSamples, seed++);
    c.expect(std::abs(mc - closed) <= 0.01 * closed,
             "KL d=" + std::to_string(d) + " closed " + fmt(closed, 6) + " vs MC " + fmt(mc, 6));
  }

  // Gaussian NLL: E_{t ~ N(m, v)}[-log N(t; mu, s2)] = 0.5 (log 2 pi s2 + (v + (m - mu)^2) / s2).
  {
    dist::HeadLayout layout;
    layout.add_gaussian();
    const double mu = 0.4, s2 = 2.5, m = -0.3, v = 0.8;
    Rng rng(37);
    std::vector<double> t(kSamples);
    for (double& x : t) x = rng.normal(m, std::sqrt(v));
    const dist::DecoderHead h{Tensor::full({kSamples, 1}, mu), Tensor::from({1}, {std::log(s2)}), &layout};
    const Tensor per_row = dist::nll(h, Tensor::from({kSamples, 1}, t));
    double mc = 0.0;
    for (double x : per_row.values()) mc += x;
    mc /= static_cast<double>(kSamples);
    const double closed = 0.5 * (dist::kLog2Pi + std::log(s2) + (v + (m - mu) * (m - mu)) / s2);
    c.expect(std::abs(mc - closed) <= 0.01 * closed, "Gaussian NLL closed " + fmt(closed, 6) + " vs MC " + fmt(mc, 6));
  }

  // Exact fixtures.
  bool exact = true;
  {
    dist::HeadLayout b;
    b.add_bernoulli();
    exact &= dist::nll({Tensor::from({1, 1}, {0.0}), {}, &b}, Tensor::from({1, 1}, {1.0}))[0] == std::log(2.0);
    exact &= dist::nll({Tensor::from({1, 1}, {0.0}), {}, &b}, Tensor::from({1, 1}, {0.0}))[0] == std::log(2.0);
    dist::HeadLayout k;
    k.add_categorical(10);
    for (int cls = 0; cls < 10; ++cls) {
      exact &= std::abs(dist::nll({Tensor::zeros({1, 10}), {}, &k}, Tensor::from({1, 1}, {double(cls)}))[0] -
                        std::log(10.0)) <= 1e-15;
    }
    dist::HeadLayout k4;
    k4.add_categorical(4);
    const Tensor logits = Tensor::from({1, 4}, {0.1, 2.0, -1.0, 0.5});
    const double lse = std::log(std::exp(0.1) + std::exp(2.0) + std::exp(-1.0) + std::exp(0.5));
    exact &= std::abs(dist::nll({logits, {}, &k4}, Tensor::from({1, 1}, {1.0}))[0] - (lse - 2.0)) <= 1e-15;
  }
  c.expect(exact, "Bernoulli log 2, uniform categorical log 10, 4-way log-softmax fixtures exact");
  return c.outcome();
}

// ---------------------------------------------------------------------------
// 4. MINE calibration.

std::pair<est::Samples, est::Samples> gaussian_pair(double rho, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> a(n), b(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = rng.normal();
    b[i] = rho * a[i] + std::sqrt(1.0 - rho * rho) * rng.normal();
  }
  return {est::Samples::from(a, n, 1), est::Samples::from(b, n, 1)};
}

Outcome mine_calibration() {
  Checks c;
  const est::MineConfig cfg = est::MineConfig::desk();
  const double truth = -0.5 * std::log(1.0 - 0.81);
  {
    const auto [a, b] = gaussian_pair(0.9, 20000, 7);
    const auto t0 = Clock::now();
    const double e = est::mine_estimate(a, b, cfg, 2020).nats;
    const double secs = seconds_since(t0);
    c.expect(std::abs(e - truth) <= 0.15 * truth, "rho=0.9: " + fmt(e) + " nats vs " + fmt(truth) + " (15%)");
    c.expect(secs < 180.0, "desk run " + fmt(secs, 3) + " s < 180 s");
  }
  {
    const auto [a, b] = gaussian_pair(0.0, 20000, 8);
    const auto t0 = Clock::now();
    const double e = est::mine_estimate(a, b, cfg, 2021).nats;
    const double secs = seconds_since(t0);
    c.expect(e >= -0.02 && e <= 0.05, "independent: " + fmt(e) + " nats in [-0.02, 0.05]");
    c.expect(secs < 180.0, "desk run " + fmt(secs, 3) + " s < 180 s");
  }
  return c.outcome();
}

// ---------------------------------------------------------------------------
// 5. Fairness metrics.

Outcome fairness_metrics() {
  using V = std::vector<int>;
  Checks c;
  bool fixtures = true;
  fixtures &= audit::accuracy(V{1, 0, 1}, V{1, 1, 1}) == 2.0 / 3.0;
  fixtures &= audit::discrimination(V{1, 1, 1, 1}, V{0, 0, 1, 1}) == 0.0;
  fixtures &= audit::discrimination(V{1, 1, 1, 0}, V{0, 0, 1, 1}) == 0.5;
  fixtures &= audit::discrimination(V{1, 1, 0, 0}, V{0, 0, 1, 1}) == 1.0;
  fixtures &= audit::error_gap(V{1, 1}, V{0, 1}, V{0, 1}) == 1.0;
  fixtures &= audit::error_gap(V{1, 1, 1, 1}, V{0, 0, 1, 1}, V{0, 1, 1, 0}) == 0.0;
  fixtures &= audit::equalized_odds_gap(V{1, 1, 1, 0, 0, 0, 0, 0}, V{0, 0, 1, 1, 0, 0, 1, 1},
                                        V{1, 1, 1, 1, 0, 0, 0, 0}) == 0.5;
  bool undefined = false;
  try {
    audit::discrimination(V{1, 0}, V{0, 0});
  } catch (const UndefinedMetricError&) {
    undefined = true;
  }
  c.expect(fixtures, "hand-enumerated fixtures exact");
  c.expect(undefined, "empty group raises an undefined-metric error");

  // Random label sets: swapping S and permuting rows leave every metric
  // bit-identical, and gaps stay in [0, 1].
  Rng rng(2020);
  int violations = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 4 + rng.below(60);
    V pred(n), s(n), t(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = i < 4 ? static_cast<int>(i % 2) : static_cast<int>(rng.below(2));
      t[i] = i < 4 ? static_cast<int>(i / 2) : static_cast<int>(rng.below(2));
      pred[i] = static_cast<int>(rng.below(2));
    }
    V swapped(n);
    for (std::size_t i = 0; i < n; ++i) swapped[i] = 1 - s[i];
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    rng.shuffle(std::span<std::size_t>(perm));
    V pp, ps, pt;
    for (std::size_t i : perm) {
      pp.push_back(pred[i]);
      ps.push_back(s[i]);
      pt.push_back(t[i]);
    }
    const double d = audit::discrimination(pred, s), e = audit::error_gap(pred, s, t),
                 eo = audit::equalized_odds_gap(pred, s, t), a = audit::accuracy(pred, t);
    violations += d != audit::discrimination(pred, swapped) || e != audit::error_gap(pred, swapped, t) ||
                  eo != audit::equalized_odds_gap(pred, swapped, t);
    violations += d != audit::discrimination(pp, ps) || e != audit::error_gap(pp, ps, pt) ||
                  eo != audit::equalized_odds_gap(pp, ps, pt) || a != audit::accuracy(pp, pt);
    for (double g : {d, e, eo}) violations += g < 0.0 || g > 1.0;
  }
  c.expect(violations == 0, "100 random label sets: swap and permutation invariance (" +
                                std::to_string(violations) + " violations)");
  return c.outcome();
}

// ---------------------------------------------------------------------------
// Adult criteria (6-8).

std::string fixture(const std::string& rel) { return std::string(VPF_SOURCE_DIR) + "/fixtures/" + rel; }

bool adult_available(std::string& why) {
  for (const char* v : {"VPF_ADULT_TRAIN", "VPF_ADULT_TEST"}) {
    const char* p = std::getenv(v);
    if (!p || !*p) {
      why = std::string(v) + " not set (UCI Adult adult.data / adult.test)";
      return false;
    }
    if (!fs::exists(p)) {
      why = std::string(v) + "=" + p + " does not exist";
      return false;
    }
  }
  return true;
}

struct Experiment {
  train::TrainConfig config;
  cli::LoadedData data;
};

Experiment adult_experiment(const std::string& name) {
  const cli::LoadedConfig lc = cli::load_config(fixture("configs/" + name));
  Experiment e{lc.config, cli::load_data(lc.config, lc.dir, {})};
  return e;
}

Outcome adult_cfb() {
  std::string why;
  if (!adult_available(why)) return {Status::kSkip, why};
  Experiment e = adult_experiment("adult_cfb.json");
  e.config.run_mine = false;
  Checks c;
  struct Point {
    double beta, acc, max_disc;
  };
  for (const Point p : {Point{1.96, 0.76, 0.03}, Point{17.0, 0.82, -1.0}}) {
    const auto t0 = Clock::now();
    const train::SweepRow r = train::run_point(e.config, p.beta, e.data.train, e.data.test, &std::cerr);
    const double secs = seconds_since(t0);
    if (r.status != "ok" || !r.audit) {
      c.expect(false, "beta " + fmt(p.beta) + " failed: " + r.error);
      continue;
    }
    const double acc = *r.audit->lr.accuracy_t;
    c.expect(std::abs(acc - p.acc) <= 0.03,
             "beta " + fmt(p.beta) + ": LR acc-on-T " + fmt(acc) + " vs " + fmt(p.acc) + " +-0.03");
    if (p.max_disc >= 0.0) {
      const double disc = *r.audit->lr.discrimination;
      c.expect(disc <= p.max_disc, "beta " + fmt(p.beta) + ": discrimination " + fmt(disc) + " <= 0.03");
    }
    c.expect(true, "beta " + fmt(p.beta) + " took " + fmt(secs, 4) + " s");
  }
  return c.outcome();
}

Outcome adult_cpf() {
  std::string why;
  if (!adult_available(why)) return {Status::kSkip, why};
  Experiment e = adult_experiment("adult_cpf.json");
  const char* reduced = std::getenv("VPF_ACCEPT_REDUCED");
  if (reduced && std::string(reduced) == "1") {
    e.config.multipliers = train::log_spaced(1.0, 50.0, 5);
    e.config.multiplier_schedule = {{"spacing", "log"}, {"low", 1.0}, {"high", 50.0}, {"count", 5}};
  }
  const auto t0 = Clock::now();
  const train::SweepReport rep = train::sweep(e.config, e.data.train, e.data.test, {}, &std::cerr);
  const double secs = seconds_since(t0);
  Checks c;
  double lo = 1.0, hi = 0.0, excess = -1.0, mine_max = -1.0;
  int failed = 0;
  for (const auto& r : rep.rows) {
    if (r.status != "ok" || !r.audit || !r.mine_nats) {
      ++failed;
      continue;
    }
    const double rf = r.audit->rf.accuracy_s;
    lo = std::min(lo, rf);
    hi = std::max(hi, rf);
    excess = std::max(excess, rf - r.audit->prior_accuracy_s);
    mine_max = std::max(mine_max, *r.mine_nats / est::kNatsPerBit);
  }
  c.expect(failed == 0, std::to_string(rep.rows.size() - failed) + "/" + std::to_string(rep.rows.size()) +
                            " sweep points completed");
  c.expect(lo >= 0.55 && hi <= 0.69, "RF acc-on-S range [" + fmt(lo) + ", " + fmt(hi) + "] within [0.55, 0.69]");
  c.expect(excess <= 0.02, "max RF excess over prior " + fmt(excess) + " <= 0.02");
  c.expect(mine_max <= 0.15, "max MINE I(S;Y) " + fmt(mine_max) + " bits <= 0.15");
  c.expect(true, std::to_string(rep.rows.size()) + "-point sweep took " + fmt(secs / 60.0, 3) + " min");
  return c.outcome();
}

Outcome adult_ppvae() {
  std::string why;
  if (!adult_available(why)) return {Status::kSkip, why};
  Experiment e = adult_experiment("adult_ppvae.json");
  e.config.run_mine = false;
  const train::SweepRow r = train::run_point(e.config, 10.0, e.data.train, e.data.test, &std::cerr);
  Checks c;
  if (r.status != "ok" || !r.audit) {
    c.expect(false, "PPVAE run failed: " + r.error);
    return c.outcome();
  }
  const double rf = r.audit->rf.accuracy_s;
  c.expect(rf >= 0.75, "PPVAE eta^-1=10: RF acc-on-S " + fmt(rf) + " >= 0.75 (prior " +
                           fmt(r.audit->prior_accuracy_s) + ")");
  return c.outcome();
}

// ---------------------------------------------------------------------------
// 9. Trends on the synthetic toy, and encoder S-invariance.

// Encodes `d` twice, once with S shifted to another level, under the same
// noise seed. Returns true when both mean and sampled outputs are identical.
bool encoder_ignores_s(const model::ModelGraph& m, const data::Dataset& d) {
  data::Dataset shifted = d;
  const int levels = static_cast<int>(d.schema->sensitive.levels.size());
  for (int& s : shifted.s) s = (s + 1) % levels;
  for (const auto mode : {data::Encoding::kMean, data::Encoding::kSampled}) {
    dist::NoiseSource n1(99), n2(99);
    const data::Representations a = data::encode_dataset(m, d, mode, n1);
    const data::Representations b = data::encode_dataset(m, shifted, mode, n2);
    if (a.y.size() != b.y.size() || std::memcmp(a.y.data(), b.y.data(), a.y.size() * sizeof(double)) != 0) {
      return false;
    }
  }
  return true;
}

Outcome toy_trends() {
  const auto t0 = Clock::now();
  const cli::LoadedConfig lc = cli::load_config(fixture("configs/toy_cfb.json"));
  const cli::LoadedData d = cli::load_data(lc.config, lc.dir, {});
  const train::SweepReport rep = train::sweep(lc.config, d.train, d.test, {}, nullptr);
  Checks c;
  std::vector<double> beta, mi, acc;
  for (const auto& r : rep.rows) {
    if (r.status != "ok" || !r.audit || !r.mine_nats) continue;
    beta.push_back(r.multiplier);
    mi.push_back(*r.mine_nats);
    acc.push_back(*r.audit->lr.accuracy_t);
  }
  c.expect(beta.size() == 5, std::to_string(beta.size()) + "/5 sweep points completed");
  if (beta.size() >= 2) {
    auto series = [](const std::vector<double>& v) {
      std::string s;
      for (double x : v) s += (s.empty() ? "" : " ") + fmt(x, 3);
      return s;
    };
    const double rho_mi = train::spearman(beta, mi);
    const double rho_acc = train::spearman(beta, acc);
    c.expect(rho_mi > 0.0, "Spearman(beta, MINE I(S;Y)) = " + fmt(rho_mi, 3) + " [" + series(mi) + " nats]");
    c.expect(rho_acc > 0.0, "Spearman(beta, LR acc-on-T) = " + fmt(rho_acc, 3) + " [" + series(acc) + "]");
  }

  // Structural: encoders without an S input give identical outputs when S
  // changes; the S-conditioned encoders are the control.
  std::string invariant, control;
  bool structural = true;
  for (const char* kind : {"cpf", "cfb", "beta_vae", "vib", "ppvae", "vfae"}) {
    const model::ModelConfig mc = model::config_for(kind, kind == std::string("vfae") ? 128.0 : 5.0);
    model::ModelGraph m(mc, d.train.schema, 2020);
    const bool same = encoder_ignores_s(m, d.test);
    const bool expect_same = !mc.condition_encoder_on_s;
    structural = structural && same == expect_same;
    std::string& list = expect_same ? invariant : control;
    list += (list.empty() ? "" : ",") + std::string(kind);
  }
  c.expect(structural, "encoder output bit-identical under S change for " + invariant +
                           "; differs for S-conditioned " + control);
  c.expect(true, "runtime " + fmt(seconds_since(t0), 3) + " s");
  return c.outcome();
}

// ---------------------------------------------------------------------------
// 10. Determinism from manifests.

int shell(const std::string& cmd) {
  const int raw = std::system(cmd.c_str());
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

std::string quote(const std::string& s) {
  std::string q = "'";
  for (char ch : s) q += ch == '\'' ? std::string("'\\''") : std::string(1, ch);
  return q + "'";
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Runs every command once, then re-executes each manifest's argv from its
// recorded cwd and output root and compares every listed output.
Outcome manifest_determinism() {
  const fs::path dir = fs::temp_directory_path() / "vpf_acceptance_replay";
  fs::remove_all(dir);
  fs::create_directories(dir);
  {
    std::ofstream cfg(dir / "toy.json");
    cfg << R"({"name": "replay", "dataset": "synthetic", "preset": "desk", "seed": 5,
      "data": {"kind": "synthetic", "n": 1200, "seed": 9, "train_fraction": 0.5},
      "model": {"kind": "cfb"}, "train": {"epochs": 2, "batch_size": 64},
      "multipliers": [1, 20], "mine": {"iterations": 60, "batch_size": 64, "window": 20}})";
  }
  const std::string bin = quote(VPF_CLI_PATH);
  const std::vector<std::string> commands = {
      "synth --n 200 --seed 3 --out synth/s",
      "oracle --self-check --fixtures 10 --out oracle/o",
      "train --config toy.json --multiplier 3 --out train/m",
      "export --config toy.json --checkpoint train/m.ckpt --split train --encoding sampled --out export/tr",
      "export --config toy.json --checkpoint train/m.ckpt --split test --encoding sampled --out export/te",
      "audit --train export/tr.csv --test export/te.csv --seed 4 --out audit/a",
      "mi --input export/te.csv --iterations 80 --batch 64 --out mi/m",
      "sweep --config toy.json --out sweep/s",
      "report --input sweep/s.csv --out report/r",
  };
  const std::vector<std::string> manifests = {"synth/s",  "oracle/o", "train/m", "export/tr", "export/te",
                                              "audit/a",  "mi/m",     "sweep/s", "report/r"};
  Checks c;
  setenv(cli::kOutputRootEnv, (dir / "out").c_str(), 1);
  for (const auto& cmd : commands) {
    // Inputs produced by earlier commands live under the output root.
    std::string line = cmd;
    for (const char* produced : {"train/m.ckpt", "export/tr.csv", "export/te.csv", "sweep/s.csv"}) {
      const auto at = line.find(std::string(" ") + produced);
      if (at != std::string::npos) line.replace(at + 1, std::strlen(produced), "out/" + std::string(produced));
    }
    if (shell("cd " + quote(dir.string()) + " && " + bin + " " + line + " 2>/dev/null") != 0) {
      unsetenv(cli::kOutputRootEnv);
      c.expect(false, "command failed: vpf " + line);
      return c.outcome();
    }
  }
  unsetenv(cli::kOutputRootEnv);

  std::size_t files = 0;
  std::vector<std::string> mismatched;
  for (const auto& m : manifests) {
    const fs::path mpath = dir / "out" / (m + ".manifest.json");
    const auto j = nlohmann::json::parse(slurp(mpath));
    const fs::path cwd = j["cwd"].get<std::string>();
    std::map<std::string, std::string> before;
    for (const auto& o : j["outputs"]) {
      const std::string p = o["path"];
      before[p] = slurp(fs::path(p).is_absolute() ? fs::path(p) : cwd / p);
      fs::remove(fs::path(p).is_absolute() ? fs::path(p) : cwd / p);
    }
    std::string cmd = "cd " + quote(cwd.string()) + " && ";
    if (j.contains("output_root")) cmd += std::string(cli::kOutputRootEnv) + "=" + quote(j["output_root"]) + " ";
    for (const auto& a : j["argv"]) cmd += quote(a) + " ";
    if (shell(cmd + "2>/dev/null") != 0) {
      mismatched.push_back(m + " (replay failed)");
      continue;
    }
    for (const auto& [p, bytes] : before) {
      ++files;
      if (slurp(fs::path(p).is_absolute() ? fs::path(p) : cwd / p) != bytes) mismatched.push_back(p);
    }
  }
  std::string bad;
  for (const auto& m : mismatched) bad += " " + m;
  c.expect(mismatched.empty() && files > 0, std::to_string(manifests.size()) + " manifests (all 8 commands), " +
                                                std::to_string(files) + " outputs byte-identical on replay" +
                                                (bad.empty() ? "" : "; differing:" + bad));
  fs::remove_all(dir);
  return c.outcome();
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> all = {
      {1, "autodiff gradient suite", autodiff_suite},
      {2, "oracle identity suite", oracle_suite},
      {3, "KL/NLL closed forms", closed_forms},
      {4, "MINE calibration (desk preset)", mine_calibration},
      {5, "fairness-metric unit suite", fairness_metrics},
      {6, "Adult CFB reproduction (paper preset)", adult_cfb},
      {7, "Adult CPF sweep (desk preset)", adult_cpf},
      {8, "Adult PPVAE leakage contrast", adult_ppvae},
      {9, "synthetic toy trends and encoder S-invariance", toy_trends},
      {10, "determinism from manifests", manifest_determinism},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& c : all) {
    if (!only.empty() && only.count(c.id) == 0) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {Status::kFail, std::string("exception: ") + e.what()};
    }
    const char* tag = o.status == Status::kPass ? "PASS" : o.status == Status::kFail ? "FAIL" : "SKIP";
    failures += o.status == Status::kFail;
    std::printf("criterion %2d %s  %s (%.1f s): %s\n", c.id, tag, c.name, seconds_since(t0), o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
