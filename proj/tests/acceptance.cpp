// Copyright 2026 The CF-CBM Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Acceptance run: one PASS/FAIL line per criterion, non-zero exit on failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <iterator>
#include <set>
#include <string>

#include "cfcbm/experiment.hpp"
#include "cfcbm/gaussian.hpp"
#include "cfcbm/loss.hpp"
#include "cfcbm/metrics.hpp"
#include "oracle.hpp"
#include "support.hpp"

using namespace cfcbm;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

double Since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

void Report(bool ok, const std::string& name, const std::string& detail) {
  std::printf("%s  %-28s %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string Fmt(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

std::vector<oracle::Vec> Columns(const Matrix& m) {
  std::vector<oracle::Vec> out;
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    out.emplace_back(m.col(j).data(), m.col(j).data() + m.rows());
  }
  return out;
}

oracle::Vec Std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

void GradientFidelity() {
  const auto start = Clock::now();
  double worst = 0.0;
  long checked = 0;
  for (std::uint64_t seed : {11, 12, 13}) {
    const ModelParams p = testing::MicroModel(seed);
    const Batch b = testing::MicroBatch();
    std::mt19937_64 rng(seed);
    const auto noise = DrawLossNoise(p.dims, b.labels, rng);
    const auto check = oracle::CheckGradients(p, b, LossWeights::DspritesCfCbm(), noise);
    worst = std::max(worst, check.max_rel_error);
    checked += check.checked;
  }
  const double secs = Since(start);
  Report(worst < 1e-3 && secs < 60.0, "gradient_fidelity",
         Fmt("max rel err %.2e over %ld params, %.2fs", worst, checked, secs));
}

void KlOracle() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> mean(-1.0, 1.0), logv(-1.0, 1.0);
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    const Eigen::Index dim = 1 + k % 4;
    GaussianDiag a{Vector::NullaryExpr(dim, [&] { return mean(rng); }),
                   Vector::NullaryExpr(dim, [&] { return logv(rng); })};
    GaussianDiag b{Vector::NullaryExpr(dim, [&] { return mean(rng); }),
                   Vector::NullaryExpr(dim, [&] { return logv(rng); })};
    const double exact = KlDiagGaussian(a, b);
    const double mc =
        oracle::MonteCarloKl(Std(a.mean), Std(a.log_var), Std(b.mean), Std(b.log_var), 100000, rng);
    worst = std::max(worst, std::abs(exact - mc) / exact);
  }
  Report(worst < 0.01, "kl_oracle", Fmt("max rel diff %.4f over 20 pairs, 1e5 samples", worst));
}

void LossOracle() {
  double worst = 0.0;
  for (std::uint64_t seed : {11, 4}) {
    for (const auto& w : {LossWeights::DspritesCfCbm(), LossWeights::MnistAddCfCbm()}) {
      const ModelParams p = testing::MicroModel(seed);
      const Batch b = testing::MicroBatch();
      const auto noise = ZeroLossNoise(p.dims, {0, 1, 0, 1});
      const auto got = CfCbmLoss(p, b, w, noise);
      const auto want =
          oracle::ScalarLoss(p, b, w, Columns(noise.z), Columns(noise.z_prime), noise.y_prime);
      for (auto [g, o] : {std::pair{got.concept_bce, want.concept_bce}, {got.task_ce, want.task_ce},
                          {got.validity_ce, want.validity_ce}, {got.kl_z, want.kl_z},
                          {got.kl_z_prime, want.kl_z_prime},
                          {got.prior_distance, want.prior_distance},
                          {got.posterior_distance, want.posterior_distance},
                          {got.total, want.total}}) {
        worst = std::max(worst, std::abs(g - o));
      }
    }
  }
  Report(worst < 1e-8, "loss_oracle", Fmt("max abs diff %.2e", worst));
}

Dataset Toy(const std::vector<oracle::Vec>& rows, const std::vector<int>& labels, int classes) {
  Dataset ds;
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto r = static_cast<Eigen::Index>(rows.front().size());
  ds.features = Matrix::Zero(n, 1);
  ds.concepts.resize(n, r);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < r; ++j) {
      ds.concepts(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
  }
  ds.labels = labels;
  ds.meta.name = "toy";
  ds.meta.features = 1;
  ds.meta.concepts = r;
  ds.meta.classes = classes;
  return ds;
}

void SparsityOracle() {
  std::mt19937_64 rng(99);
  long compared = 0, mismatches = 0;
  for (int r = 1; r <= 8; ++r) {
    for (int trial = 0; trial < 50; ++trial) {
      std::bernoulli_distribution bit(0.2 + 0.1 * (trial % 5));
      std::uniform_int_distribution<int> label(0, 2);
      const int rows_n = 4 + trial % 20;
      std::vector<oracle::Vec> rows(static_cast<std::size_t>(rows_n));
      std::vector<int> labels(rows.size());
      for (std::size_t i = 0; i < rows.size(); ++i) {
        for (int j = 0; j < r; ++j) rows[i].push_back(bit(rng) ? 1.0 : 0.0);
        labels[i] = label(rng);
      }
      const Dataset ds = Toy(rows, labels, 3);
      oracle::Vec c;
      for (int j = 0; j < r; ++j) c.push_back(bit(rng) ? 1.0 : 0.0);
      const Vector cv = Eigen::Map<const Vector>(c.data(), r);
      for (int target = 0; target < 3; ++target) {
        const int want = oracle::BruteForceSparsity(c, target, rows, labels);
        int got = -1;
        try {
          got = metrics::OptimalSparsityOracle(cv, target, ds);
        } catch (const Error&) {
        }
        ++compared;
        if (got != want) ++mismatches;
      }
    }
  }
  Report(mismatches == 0, "sparsity_oracle",
         Fmt("%ld/%ld toy queries agree, r = 1..8", compared - mismatches, compared));
}

ExperimentConfig Base(const std::string& name, const std::string& kind, int epochs,
                      const LossWeights& weights) {
  ExperimentConfig c;
  c.name = name;
  c.dataset.kind = kind;
  c.dataset.n = 10000;
  c.train.epochs = epochs;
  c.train.batch_size = 1024;
  c.train.learning_rate = 0.005;
  c.train.latent = 128;
  c.train.weights = weights;
  TrainConfig b = c.train;
  b.mode = ModelMode::kCbm;
  b.weights = LossWeights::PlainCbm();
  c.baseline = b;
  c.output_dir = testing::ScratchDir("acceptance_" + name);
  return c;
}

double Get(const ExperimentResult& r, const std::string& name) {
  return r.report.Summary(name).values.front();
}

double Timing(const ExperimentResult& r, const std::string& key) {
  return r.timings["seeds"]["0"].value(key, 0.0);
}

void DspritesCriteria(const ExperimentResult& r, double wall) {
  const double auc = Get(r, "cfcbm.task_auc"), cauc = Get(r, "cfcbm.concept_auc");
  const double cbm_auc = Get(r, "cbm.task_auc");
  const double train_secs = Timing(r, "train_seconds") + Timing(r, "baseline_train_seconds");
  Report(auc >= 0.97 && cauc >= 0.95 && std::abs(auc - cbm_auc) <= 0.01 && train_secs < 600.0,
         "generalization",
         Fmt("task auc %.4f (cbm %.4f), concept auc %.4f (cbm %.4f), train %.0fs, run %.0fs", auc,
             cbm_auc, cauc, Get(r, "cbm.concept_auc"), train_secs, wall));

  const double noisy = Get(r, "cfcbm.noisy_accuracy@0.3");
  const double acc_03 = Get(r, "cfcbm.acc_int@0.3");
  double lo = 1e9, hi = -1e9;
  for (const char* p : {"0.1", "0.3", "0.5"}) {
    const double a = Get(r, std::string("cfcbm.acc_int@") + p);
    lo = std::min(lo, a);
    hi = std::max(hi, a);
  }
  Report(acc_03 - noisy >= 0.10 && hi - lo < 0.10, "task_driven_interventions",
         Fmt("acc_int@0.3 %.3f vs noisy %.3f, spread over noise %.3f (acc_int %.3f/%.3f/%.3f)",
             acc_03, noisy, hi - lo, Get(r, "cfcbm.acc_int@0.1"), acc_03,
             Get(r, "cfcbm.acc_int@0.5")));

  const double var_bb = Get(r, "cfcbm.variability");
  const double var_mv = Get(r, "cfcbm.variability_multiverse");
  Report(var_mv > var_bb, "multiverse_diversity",
         Fmt("variability multiverse(n=10) %.3f vs best bet %.3f", var_mv, var_bb));

  const double imagine_ms = Timing(r, "cfcbm_ms_per_counterfactual");
  const double posthoc_ms = Timing(r, "posthoc_ms_per_counterfactual");
  Report(imagine_ms < 10.0 && posthoc_ms >= 10.0 * imagine_ms, "throughput",
         Fmt("imagine %.4f ms, posthoc %.3f ms per counterfactual (%.0fx)", imagine_ms, posthoc_ms,
             posthoc_ms / imagine_ms));
}

void Validity(const ExperimentResult& ds, const ExperimentResult& mn) {
  const double d = Get(ds, "cfcbm.validity"), dp = Get(ds, "posthoc.validity");
  const double m = Get(mn, "cfcbm.validity"), mp = Get(mn, "posthoc.validity");
  Report(d >= 95.0 && m >= 90.0 && d >= dp && m >= mp, "validity",
         Fmt("dsprites %.1f%% (posthoc %.1f%%), mnist_add %.1f%% (posthoc %.1f%%)", d, dp, m, mp));
}

void Confounder(const ExperimentResult& r, const std::vector<std::uint64_t>& seeds) {
  std::string detail;
  bool ok = true;
  for (std::size_t k = 0; k < seeds.size(); ++k) {
    auto color = [&](const std::string& prefix) {
      double best = 0.0;
      for (const char* c : {"red", "green", "blue"}) {
        best = std::max(best, r.report.Summary(prefix + "cace." + c).values[k]);
      }
      return best;
    };
    const double cf = color("cfcbm."), cbm = color("cbm.");
    ok = ok && cf < cbm;
    detail += Fmt("%sseed %llu: %.4f vs cbm %.4f", k ? "; " : "",
                  static_cast<unsigned long long>(seeds[k]), cf, cbm);
  }
  Report(ok, "confounder_effect", "color cace " + detail);
}

std::string Slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void Determinism() {
  ExperimentConfig c = Base("determinism", "dsprites", 4, LossWeights::DspritesCfCbm());
  c.dataset.n = 800;
  c.train.latent = 32;
  c.train.batch_size = 128;
  c.baseline->latent = 32;
  c.baseline->batch_size = 128;
  c.baseline->epochs = 4;
  c.seeds = {0, 1};
  c.metrics = {"task_auc", "concept_auc", "validity", "validity_multiverse", "proximity",
               "delta_sparsity", "iou", "variability", "acc_int", "cace"};
  const auto root = c.output_dir;
  c.output_dir = root / "a";
  RunExperiment(c);
  c.output_dir = root / "b";
  RunExperiment(c);
  std::set<std::string> files;
  long compared = 0, differing = 0;
  for (const auto& side : {root / "a", root / "b"}) {
    for (const auto& e : std::filesystem::recursive_directory_iterator(side)) {
      if (e.is_regular_file() && e.path().filename() != "timings.json") {
        files.insert(std::filesystem::relative(e.path(), side).string());
      }
    }
  }
  for (const auto& f : files) {
    ++compared;
    const auto pa = root / "a" / f, pb = root / "b" / f;
    if (!std::filesystem::exists(pa) || !std::filesystem::exists(pb) || Slurp(pa) != Slurp(pb)) {
      ++differing;
    }
  }
  Report(differing == 0 && compared > 0, "determinism",
         Fmt("%ld/%ld output files identical across two runs", compared - differing, compared));
}

}  // namespace

int main() {
  GradientFidelity();
  KlOracle();
  LossOracle();
  SparsityOracle();

  ExperimentConfig ds = Base("dsprites", "dsprites", 75, LossWeights::DspritesCfCbm());
  ds.seeds = {0};
  ds.metrics = {"task_auc", "concept_auc", "validity", "variability", "variability_multiverse",
                "acc_int"};
  ds.multiverse_samples = 10;
  ds.noise_levels = {0.1, 0.3, 0.5};

  ExperimentConfig mn = Base("mnist_add", "mnist_add", 150, LossWeights::MnistAddCfCbm());
  mn.seeds = {0};
  mn.metrics = {"validity"};

  ExperimentConfig cf = Base("confounded", "dsprites_confounded", 75, LossWeights::DspritesCfCbm());
  cf.dataset.confound_rate = 0.85;
  cf.seeds = {0, 1, 2};
  cf.metrics = {"cace"};
  cf.parallel_seeds = true;

  auto timed = [](const ExperimentConfig& c) {
    const auto start = Clock::now();
    auto r = RunExperiment(c);
    return std::pair{std::move(r), Since(start)};
  };
  auto ds_run = std::async(std::launch::async, timed, ds);
  auto mn_run = std::async(std::launch::async, timed, mn);
  auto cf_run = std::async(std::launch::async, timed, cf);

  try {
    const auto [ds_result, ds_secs] = ds_run.get();
    DspritesCriteria(ds_result, ds_secs);
    const auto [mn_result, mn_secs] = mn_run.get();
    Validity(ds_result, mn_result);
    const auto [cf_result, cf_secs] = cf_run.get();
    Confounder(cf_result, cf.seeds);
    std::printf("      (runs: dsprites %.0fs, mnist_add %.0fs, confounded %.0fs)\n", ds_secs,
                mn_secs, cf_secs);
  } catch (const std::exception& e) {
    Report(false, "experiments", e.what());
  }
  Determinism();

  std::printf("%s: %d criteria failed\n", failures ? "FAILED" : "OK", failures);
  return failures ? 1 : 0;
}
