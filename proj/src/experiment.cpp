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

#include "cfcbm/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "cfcbm/checkpoint.hpp"
#include "cfcbm/engine.hpp"
#include "cfcbm/metrics.hpp"

namespace cfcbm {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double Seconds(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

bool Wants(const ExperimentConfig& config, const std::string& metric) {
  return std::find(config.metrics.begin(), config.metrics.end(), metric) != config.metrics.end();
}

std::string NoiseTag(double p) {
  std::ostringstream os;
  os << p;
  return os.str();
}

// Runs a stage and re-throws any failure tagged with the stage name.
template <typename Fn>
auto Stage(const std::string& stage, Fn&& fn) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(stage, e.code(), e.what());
  } catch (const json::exception& e) {
    throw StageError(stage, ErrorCode::kConfigError, e.what());
  } catch (const std::exception& e) {
    throw StageError(stage, ErrorCode::kInvalidInput, e.what());
  }
}

struct SeedOutcome {
  std::vector<std::pair<std::string, double>> metrics;
  json timings = json::object();
};

// Targets shared by every counterfactual generator: a uniform class other
// than the factual prediction.
std::vector<int> DrawTargets(const std::vector<Prediction>& preds, int classes,
                             std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick(0, std::max(classes - 2, 0));
  std::vector<int> targets;
  targets.reserve(preds.size());
  for (const auto& p : preds) {
    int t = pick(rng);
    if (classes > 1 && t >= p.label) ++t;
    targets.push_back(t);
  }
  return targets;
}

void AddCounterfactualMetrics(const ExperimentConfig& config, const std::string& prefix,
                              const std::vector<Prediction>& preds,
                              const std::vector<std::optional<Counterfactual>>& generated,
                              const Dataset& train, SeedOutcome& out) {
  std::vector<Counterfactual> found;
  std::vector<Prediction> found_preds;
  for (std::size_t i = 0; i < generated.size(); ++i) {
    if (!generated[i]) continue;
    found.push_back(*generated[i]);
    found_preds.push_back(preds[i]);
  }
  auto add = [&](const std::string& name, double v) { out.metrics.emplace_back(prefix + name, v); };
  if (Wants(config, "validity")) {
    double valid = 0.0;
    for (const auto& cf : found) valid += cf.valid ? 1.0 : 0.0;
    add("validity", generated.empty() ? 0.0 : 100.0 * valid / generated.size());
  }
  const bool any = !found.empty();
  auto need = [&](const std::string& metric) {
    if (!Wants(config, metric)) return false;
    if (!any) {
      throw Error(ErrorCode::kUndefinedMetric, prefix + metric + ": no counterfactual was produced");
    }
    return true;
  };
  if (need("proximity")) add("proximity", metrics::Proximity(found, train.concepts));
  if (need("delta_sparsity")) add("delta_sparsity", metrics::DeltaSparsity(found_preds, found, train));
  if (need("iou")) add("iou", metrics::IouPlausibility(found, train));
  if (need("variability")) add("variability", metrics::Variability(found, train.concepts));
}

void EvaluateModel(const ExperimentConfig& config, const std::string& prefix,
                   const ModelParams& model, const Splits& data, std::uint64_t seed,
                   bool is_baseline, SeedOutcome& out) {
  auto add = [&](const std::string& name, double v) { out.metrics.emplace_back(prefix + name, v); };
  if (Wants(config, "task_auc") || Wants(config, "concept_auc") ||
      Wants(config, "task_accuracy") || Wants(config, "concept_accuracy")) {
    const auto g = metrics::EvaluateGeneralization(model, data.test);
    if (Wants(config, "task_auc")) add("task_auc", g.task_auc);
    if (Wants(config, "concept_auc")) add("concept_auc", g.concept_auc);
    if (Wants(config, "task_accuracy")) add("task_accuracy", g.task_accuracy);
    if (Wants(config, "concept_accuracy")) add("concept_accuracy", g.concept_accuracy);
  }
  if (Wants(config, "cace")) {
    for (Eigen::Index i = 0; i < model.dims.concepts; ++i) {
      const auto& names = data.test.meta.concept_names;
      const std::string name = static_cast<std::size_t>(i) < names.size()
                                   ? names[static_cast<std::size_t>(i)]
                                   : "c" + std::to_string(i);
      add("cace." + name, metrics::CausalConceptEffect(model, data.test, i).summary);
    }
  }
  if (Wants(config, "acc_int") && !is_baseline) {
    if (model.mode != ModelMode::kCfCbm) {
      throw Error(ErrorCode::kUndefinedMetric, "acc_int needs a cfcbm model");
    }
    for (double p : config.noise_levels) {
      std::mt19937_64 rng(seed ^ 0xacc1'0000ULL);
      const auto r = metrics::EvaluateInterventionAccuracy(model, data.test, p, rng);
      add("acc_int@" + NoiseTag(p), r.acc_int);
      add("noisy_accuracy@" + NoiseTag(p), r.noisy_accuracy);
    }
  }
}

bool WantsCounterfactuals(const ExperimentConfig& config) {
  for (const char* m : {"validity", "proximity", "delta_sparsity", "iou", "variability",
                        "validity_multiverse", "variability_multiverse"}) {
    if (Wants(config, m)) return true;
  }
  return false;
}

void EvaluateCfCbmCounterfactuals(const ExperimentConfig& config, const ModelParams& model,
                                  const Splits& data, std::uint64_t seed, SeedOutcome& out) {
  const auto preds = PredictBatch(model, data.test.features.transpose());
  const auto targets = DrawTargets(preds, static_cast<int>(model.dims.classes), seed ^ 0x7a29);
  std::mt19937_64 rng(seed ^ 0xcf00);
  std::vector<std::optional<Counterfactual>> best;
  best.reserve(preds.size());
  const auto start = Clock::now();
  for (std::size_t i = 0; i < preds.size(); ++i) {
    best.emplace_back(
        Imagine(model, preds[i], targets[i], InferenceMode::kBestBet, 1, rng).front());
  }
  out.timings["cfcbm_ms_per_counterfactual"] =
      preds.empty() ? 0.0 : 1000.0 * Seconds(start) / static_cast<double>(preds.size());
  AddCounterfactualMetrics(config, "cfcbm.", preds, best, data.train, out);

  if (Wants(config, "validity_multiverse") || Wants(config, "variability_multiverse")) {
    std::vector<Counterfactual> many;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      auto draws = Imagine(model, preds[i], targets[i], InferenceMode::kMultiverse,
                           config.multiverse_samples, rng);
      many.insert(many.end(), draws.begin(), draws.end());
    }
    if (Wants(config, "validity_multiverse")) {
      out.metrics.emplace_back("cfcbm.validity_multiverse", metrics::Validity(many));
    }
    if (Wants(config, "variability_multiverse")) {
      out.metrics.emplace_back("cfcbm.variability_multiverse",
                               metrics::Variability(many, data.train.concepts));
    }
  }
}

void EvaluatePosthocCounterfactuals(const ExperimentConfig& config, const ModelParams& model,
                                    const Splits& data, std::uint64_t seed, SeedOutcome& out) {
  const auto preds = PredictBatch(model, data.test.features.transpose());
  const auto targets = DrawTargets(preds, static_cast<int>(model.dims.classes), seed ^ 0x7a29);
  std::vector<std::optional<Counterfactual>> found;
  found.reserve(preds.size());
  const auto start = Clock::now();
  for (std::size_t i = 0; i < preds.size(); ++i) {
    SearchConfig search = config.search;
    search.seed = seed * 1'000'003ULL + i;
    found.push_back(PosthocSearch(model, data.test.features.row(static_cast<Eigen::Index>(i))
                                             .transpose(),
                                  targets[i], search)
                        .counterfactual);
  }
  out.timings["posthoc_ms_per_counterfactual"] =
      preds.empty() ? 0.0 : 1000.0 * Seconds(start) / static_cast<double>(preds.size());
  AddCounterfactualMetrics(config, "posthoc.", preds, found, data.train, out);
}

SeedOutcome RunSeed(const ExperimentConfig& config, std::uint64_t seed) {
  const fs::path dir = config.output_dir / ("seed_" + std::to_string(seed));
  fs::create_directories(dir);
  SeedOutcome out;
  const auto data = Stage("data", [&] {
    const Dataset ds = MaterializeDataset(config.dataset, seed);
    SplitSpec split = config.dataset.split;
    split.seed = seed;
    return Split(ds, split);
  });

  TrainConfig tc = config.train;
  tc.seed = seed;
  const auto start = Clock::now();
  const auto trained = Stage("train", [&] { return Train(data.train, data.val, tc); });
  out.timings["train_seconds"] = Seconds(start);
  const std::string primary = ModelModeName(tc.mode);
  Stage("train", [&] {
    SaveCheckpoint(trained.best_params, dir / (primary + ".ckpt.json"));
    WriteHistoryCsv(trained.history, dir / (primary + "_history.csv"));
    return 0;
  });

  std::optional<TrainResult> baseline;
  if (config.baseline) {
    TrainConfig bc = *config.baseline;
    bc.seed = seed;
    const auto bstart = Clock::now();
    baseline = Stage("train", [&] { return Train(data.train, data.val, bc); });
    out.timings["baseline_train_seconds"] = Seconds(bstart);
    Stage("train", [&] {
      SaveCheckpoint(baseline->best_params, dir / "cbm.ckpt.json");
      WriteHistoryCsv(baseline->history, dir / "cbm_history.csv");
      return 0;
    });
  }

  Stage("eval", [&] {
    EvaluateModel(config, primary + ".", trained.best_params, data, seed, false, out);
    if (baseline) EvaluateModel(config, "cbm.", baseline->best_params, data, seed, true, out);
    if (WantsCounterfactuals(config)) {
      if (tc.mode == ModelMode::kCfCbm) {
        EvaluateCfCbmCounterfactuals(config, trained.best_params, data, seed, out);
      } else {
        EvaluatePosthocCounterfactuals(config, trained.best_params, data, seed, out);
      }
      if (baseline) EvaluatePosthocCounterfactuals(config, baseline->best_params, data, seed, out);
    }
    return 0;
  });
  return out;
}

void MoveToFailed(const ExperimentConfig& config, std::uint64_t seed, const StageError& e) {
  const fs::path src = config.output_dir / ("seed_" + std::to_string(seed));
  const fs::path failed = config.output_dir / "failed";
  std::error_code ec;
  fs::create_directories(failed, ec);
  const fs::path dst = failed / src.filename();
  fs::remove_all(dst, ec);
  if (fs::exists(src)) fs::rename(src, dst, ec);
  fs::create_directories(dst, ec);
  std::ofstream(dst / "error.json") << json{{"stage", e.stage()},
                                            {"code", std::string(ErrorCodeName(e.code()))},
                                            {"message", e.what()}}
                                           .dump(2)
                                    << '\n';
}

json DatasetSpecToJson(const DatasetSpec& d) {
  json j = {{"kind", d.kind},
            {"n", d.n},
            {"split", {{"train", d.split.train}, {"val", d.split.val}, {"test", d.split.test}}}};
  if (d.confound_rate) j["confound_rate"] = *d.confound_rate;
  if (d.seed) j["seed"] = *d.seed;
  if (!d.path.empty()) j["path"] = d.path.string();
  return j;
}

}  // namespace

const std::vector<std::string>& KnownMetrics() {
  static const std::vector<std::string> names = {
      "task_auc",   "concept_auc", "task_accuracy",       "concept_accuracy",
      "validity",   "proximity",   "delta_sparsity",      "iou",
      "variability", "validity_multiverse", "variability_multiverse",
      "acc_int",    "cace"};
  return names;
}

void ExperimentConfig::Validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::kConfigError, msg); };
  if (seeds.empty()) fail("at least one seed is required");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    fail("seeds must be distinct");
  }
  if (metrics.empty()) fail("metric list is empty");
  for (const auto& m : metrics) {
    const auto& known = KnownMetrics();
    if (std::find(known.begin(), known.end(), m) == known.end()) fail("unknown metric '" + m + "'");
  }
  static const std::set<std::string> kinds = {"dsprites", "dsprites_confounded", "mnist_add",
                                              "csv"};
  if (!kinds.contains(dataset.kind)) fail("unknown dataset kind '" + dataset.kind + "'");
  if (dataset.kind == "csv") {
    if (dataset.path.empty()) fail("csv dataset needs a path");
    if (!fs::exists(dataset.path)) fail("dataset file not found: " + dataset.path.string());
  } else if (dataset.n < 10) {
    fail("dataset.n must be >= 10");
  }
  if (dataset.confound_rate && (*dataset.confound_rate < 0.5 || *dataset.confound_rate > 1.0)) {
    fail("confound_rate must lie in [0.5, 1]");
  }
  train.Validate();
  if (baseline) {
    baseline->Validate();
    if (baseline->mode != ModelMode::kCbm) fail("baseline must be a cbm-mode model");
    if (train.mode != ModelMode::kCfCbm) fail("a baseline needs a cfcbm primary model");
  }
  search.Validate();
  if (multiverse_samples < 1) fail("multiverse_samples must be >= 1");
  for (double p : noise_levels) {
    if (p < 0.0 || p > 1.0) fail("noise levels must lie in [0, 1]");
  }
}

ExperimentConfig ExperimentConfigFromJson(const json& doc) {
  ExperimentConfig c;
  try {
    c.name = doc.value("name", c.name);
    if (doc.contains("seeds")) c.seeds = doc.at("seeds").get<std::vector<std::uint64_t>>();
    if (doc.contains("metrics")) c.metrics = doc.at("metrics").get<std::vector<std::string>>();
    if (doc.contains("output_dir")) c.output_dir = doc.at("output_dir").get<std::string>();
    c.multiverse_samples = doc.value("multiverse_samples", c.multiverse_samples);
    if (doc.contains("noise_levels")) {
      c.noise_levels = doc.at("noise_levels").get<std::vector<double>>();
    }
    c.parallel_seeds = doc.value("parallel_seeds", c.parallel_seeds);
    if (doc.contains("dataset")) {
      const auto& d = doc.at("dataset");
      c.dataset.kind = d.value("kind", c.dataset.kind);
      c.dataset.n = d.value("n", c.dataset.n);
      if (d.contains("confound_rate")) c.dataset.confound_rate = d.at("confound_rate").get<double>();
      if (d.contains("path")) c.dataset.path = d.at("path").get<std::string>();
      if (d.contains("seed")) c.dataset.seed = d.at("seed").get<std::uint64_t>();
      if (d.contains("split")) {
        const auto& s = d.at("split");
        c.dataset.split.train = s.value("train", c.dataset.split.train);
        c.dataset.split.val = s.value("val", c.dataset.split.val);
        c.dataset.split.test = s.value("test", c.dataset.split.test);
      }
    }
    if (c.dataset.kind == "mnist_add") c.train.weights = LossWeights::MnistAddCfCbm();
    if (doc.contains("train")) c.train = TrainConfigFromJson(doc.at("train"), c.train);
    if (doc.contains("weights")) c.train.weights = LossWeightsFromJson(doc.at("weights"), c.train.weights);
    if (doc.contains("baseline")) {
      const auto& b = doc.at("baseline");
      TrainConfig base = c.train;
      base.mode = ModelMode::kCbm;
      base.weights = LossWeights::PlainCbm();
      if (b.is_boolean()) {
        if (b.get<bool>()) c.baseline = base;
      } else {
        c.baseline = TrainConfigFromJson(b, base);
      }
    }
    if (doc.contains("search")) {
      const auto& s = doc.at("search");
      c.search.max_radius = s.value("max_radius", c.search.max_radius);
      c.search.radius_steps = s.value("radius_steps", c.search.radius_steps);
      c.search.samples_per_radius = s.value("samples_per_radius", c.search.samples_per_radius);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfigError, std::string("bad experiment config: ") + e.what());
  }
  c.Validate();
  return c;
}

ExperimentConfig LoadExperimentConfig(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kConfigError, "cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfigError, path.string() + ": " + e.what());
  }
  return ExperimentConfigFromJson(doc);
}

Dataset MaterializeDataset(const DatasetSpec& spec, std::uint64_t run_seed) {
  const std::uint64_t seed = spec.seed.value_or(run_seed);
  if (spec.kind == "dsprites") return GenDspritesLike(spec.n, seed);
  if (spec.kind == "dsprites_confounded") {
    DspritesOptions options;
    options.confound_rate = spec.confound_rate.value_or(0.85);
    return GenDspritesLike(spec.n, seed, options);
  }
  if (spec.kind == "mnist_add") return GenMnistAdd(spec.n, seed);
  if (spec.kind == "csv") return LoadDataset(spec.path);
  throw Error(ErrorCode::kConfigError, "unknown dataset kind '" + spec.kind + "'");
}

int ThreadBudget() {
  if (const char* env = std::getenv("CFX_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

ExperimentResult RunExperiment(const ExperimentConfig& config) {
  Stage("config", [&] {
    config.Validate();
    return 0;
  });
  fs::create_directories(config.output_dir);

  const std::size_t n = config.seeds.size();
  std::vector<std::optional<SeedOutcome>> outcomes(n);
  std::vector<std::exception_ptr> errors(n);
  auto work = [&](std::size_t k) {
    try {
      outcomes[k] = RunSeed(config, config.seeds[k]);
    } catch (const StageError& e) {
      MoveToFailed(config, config.seeds[k], e);
      errors[k] = std::current_exception();
    }
  };

  const auto start = Clock::now();
  if (config.parallel_seeds && n > 1) {
    const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(ThreadBudget()));
    std::mutex mu;
    std::size_t next = 0;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (;;) {
          std::size_t k;
          {
            std::lock_guard lock(mu);
            if (next >= n) return;
            k = next++;
          }
          work(k);
        }
      });
    }
    for (auto& t : pool) t.join();
  } else {
    for (std::size_t k = 0; k < n; ++k) {
      work(k);
      if (errors[k]) break;
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  ExperimentResult result;
  result.timings = {{"total_seconds", Seconds(start)}, {"seeds", json::object()}};
  for (std::size_t k = 0; k < n; ++k) {
    for (const auto& [name, v] : outcomes[k]->metrics) result.report.Add(name, v);
    result.timings["seeds"][std::to_string(config.seeds[k])] = outcomes[k]->timings;
  }
  result.report.SetNote("name", config.name);
  result.report.SetNote("seeds", config.seeds);
  result.report.SetNote("dataset", DatasetSpecToJson(config.dataset));
  result.report.SetNote("train", TrainConfigToJson(config.train));
  if (config.baseline) result.report.SetNote("baseline", TrainConfigToJson(*config.baseline));

  Stage("report", [&] {
    result.report.Write(config.output_dir / "report.json", config.output_dir / "report.md",
                        config.name);
    std::ofstream(config.output_dir / "timings.json") << result.timings.dump(2) << '\n';
    return 0;
  });
  return result;
}

}  // namespace cfcbm
