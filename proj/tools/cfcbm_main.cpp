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

#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cfcbm/checkpoint.hpp"
#include "cfcbm/engine.hpp"
#include "cfcbm/experiment.hpp"
#include "cfcbm/service.hpp"

namespace {

using namespace cfcbm;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitOther = 1;
constexpr int kExitConfig = 2;
constexpr int kExitDivergence = 3;
constexpr int kExitMetric = 4;

int ExitCodeFor(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfigError:
    case ErrorCode::kParseError:
    case ErrorCode::kValidationError:
    case ErrorCode::kCorruptFile:
    case ErrorCode::kVersionMismatch:
      return kExitConfig;
    case ErrorCode::kTrainingDivergence:
      return kExitDivergence;
    case ErrorCode::kUndefinedMetric:
    case ErrorCode::kNotFound:
      return kExitMetric;
    default:
      return kExitOther;
  }
}

std::vector<std::string> SplitList(const std::string& list) {
  std::vector<std::string> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> ToStd(const Vector& v) { return {v.data(), v.data() + v.size()}; }

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string mode;
  std::string metrics;
};

ExperimentConfig BuildConfig(const Common& o) {
  ExperimentConfig c = o.config.empty() ? ExperimentConfig{} : LoadExperimentConfig(o.config);
  if (o.config.empty()) c.metrics = {"task_auc", "concept_auc", "validity"};
  if (o.seed) c.seeds = {*o.seed};
  if (!o.out.empty()) c.output_dir = o.out;
  if (!o.mode.empty()) {
    c.train.mode = ParseModelMode(o.mode);
    if (c.train.mode == ModelMode::kCbm) {
      c.train.weights = LossWeights::PlainCbm();
      c.baseline.reset();
    }
  }
  if (!o.metrics.empty()) c.metrics = SplitList(o.metrics);
  c.Validate();
  return c;
}

int GenData(const std::string& kind, Eigen::Index n, std::uint64_t seed,
            std::optional<double> confound, const std::string& out) {
  DatasetSpec spec;
  spec.kind = kind;
  spec.n = n;
  spec.confound_rate = confound;
  if (kind == "csv") throw Error(ErrorCode::kConfigError, "gen-data cannot generate csv");
  const Dataset ds = MaterializeDataset(spec, seed);
  SaveDataset(ds, out);
  std::cout << "wrote " << ds.size() << " rows to " << out << " (+ " << MetadataPath(out).string()
            << ")\n";
  return kExitOk;
}

int TrainCmd(const Common& o, const std::string& data_path) {
  ExperimentConfig c = BuildConfig(o);
  if (!data_path.empty()) {
    c.dataset.kind = "csv";
    c.dataset.path = data_path;
  }
  const std::uint64_t seed = c.seeds.front();
  const Dataset ds = MaterializeDataset(c.dataset, seed);
  SplitSpec split = c.dataset.split;
  split.seed = seed;
  const Splits s = Split(ds, split);
  TrainConfig tc = c.train;
  tc.seed = seed;
  const auto result = Train(s.train, s.val, tc);
  std::filesystem::create_directories(c.output_dir);
  const auto ckpt = c.output_dir / (ModelModeName(tc.mode) + ".ckpt.json");
  SaveCheckpoint(result.best_params, ckpt);
  WriteHistoryCsv(result.history, c.output_dir / (ModelModeName(tc.mode) + "_history.csv"));
  std::cout << "best epoch " << result.history.best_epoch << ", checkpoint " << ckpt.string()
            << "\n";
  return kExitOk;
}

int EvalCmd(const Common& o) {
  const ExperimentConfig c = BuildConfig(o);
  const auto result = RunExperiment(c);
  std::cout << result.report.ToMarkdown(c.name);
  std::cout << "\nreport written to " << (c.output_dir / "report.json").string() << "\n";
  return kExitOk;
}

int ImagineCmd(const std::string& model_path, const std::string& data_path, long row, int target,
               const std::string& mode_name, int n_samples, std::uint64_t seed) {
  const ModelParams model = LoadCheckpoint(model_path);
  const Dataset ds = LoadDataset(data_path);
  if (row < 0 || row >= ds.size()) throw Error(ErrorCode::kInvalidInput, "row out of range");
  if (ds.meta.features != model.dims.features) {
    throw Error(ErrorCode::kInvalidDimension, "dataset and model feature sizes differ");
  }
  const InferenceMode mode = ParseInferenceMode(mode_name);
  std::mt19937_64 rng(seed);
  const Vector x = ds.features.row(row).transpose();
  const Prediction p = Predict(model, x, InferenceMode::kBestBet, rng);
  json out = {{"row", row},
              {"factual", {{"concepts", ToStd(p.concepts)}, {"label", p.label}}},
              {"counterfactuals", json::array()}};
  for (const auto& cf : Imagine(model, p, target, mode, n_samples, rng)) {
    out["counterfactuals"].push_back({{"concepts", ToStd(cf.concepts)},
                                      {"class_probs", ToStd(cf.class_probs)},
                                      {"label", cf.label},
                                      {"sparsity", cf.sparsity},
                                      {"valid", cf.valid}});
  }
  std::cout << out.dump(2) << "\n";
  return kExitOk;
}

int ServeCmd(const std::string& model_path, const std::string& data_path, const std::string& host,
             int port, int demo_rows) {
  ServiceOptions options;
  if (!data_path.empty()) {
    Dataset ds = LoadDataset(data_path);
    options.concept_names = ds.meta.concept_names;
    options.class_names = ds.meta.class_names;
    std::vector<Eigen::Index> rows;
    for (Eigen::Index i = 0; i < std::min<Eigen::Index>(ds.size(), demo_rows); ++i) rows.push_back(i);
    options.demo = ds.Subset(rows);
  }
  const auto service = InferenceService::FromCheckpoint(model_path, options);
  std::cout << "serving " << service.model_id() << " on http://" << host << ":" << port
            << "/v1/\n"
            << std::flush;
  Serve(service, host, port);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Counterfactual concept bottleneck models"};
  app.require_subcommand(1);

  Common common;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", common.config, "experiment config (JSON)");
    cmd->add_option("--seed", common.seed, "single seed, overrides the config list");
    cmd->add_option("--out", common.out, "output directory");
    cmd->add_option("--mode", common.mode, "cfcbm or cbm");
    cmd->add_option("--metrics", common.metrics, "comma-separated metric names");
  };

  std::string kind = "dsprites", out_csv;
  Eigen::Index n = 10000;
  std::uint64_t gen_seed = 0;
  std::optional<double> confound;
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset as CSV");
  gen->add_option("--kind", kind, "dsprites | dsprites_confounded | mnist_add");
  gen->add_option("-n,--rows", n, "number of rows");
  gen->add_option("--seed", gen_seed);
  gen->add_option("--confound-rate", confound);
  gen->add_option("--out", out_csv, "CSV path")->required();

  std::string data_path;
  auto* train = app.add_subcommand("train", "train one model and save its best checkpoint");
  add_common(train);
  train->add_option("--data", data_path, "CSV dataset (overrides the config dataset)");

  auto* eval = app.add_subcommand("eval", "run the experiment protocol and write the report");
  add_common(eval);

  std::string model_path, mode_name = "best_bet";
  long row = 0;
  int target = 0, n_samples = 1;
  std::uint64_t im_seed = 0;
  auto* imagine = app.add_subcommand("imagine", "counterfactuals for one CSV row");
  imagine->add_option("--model", model_path)->required();
  imagine->add_option("--data", data_path)->required();
  imagine->add_option("--row", row);
  imagine->add_option("--target", target)->required();
  imagine->add_option("--mode", mode_name, "best_bet or multiverse");
  imagine->add_option("--n-samples", n_samples);
  imagine->add_option("--seed", im_seed);

  std::string host = "127.0.0.1";
  int port = 8080, demo_rows = 50;
  auto* serve = app.add_subcommand("serve", "HTTP inference service under /v1/");
  serve->add_option("--model", model_path)->required();
  serve->add_option("--data", data_path, "CSV whose metadata names the concepts and classes");
  serve->add_option("--host", host);
  serve->add_option("--port", port);
  serve->add_option("--demo-rows", demo_rows);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*gen) return GenData(kind, n, gen_seed, confound, out_csv);
    if (*train) return TrainCmd(common, data_path);
    if (*eval) return EvalCmd(common);
    if (*imagine) {
      return ImagineCmd(model_path, data_path, row, target, mode_name, n_samples, im_seed);
    }
    if (*serve) return ServeCmd(model_path, data_path, host, port, demo_rows);
  } catch (const StageError& e) {
    std::cerr << "error [" << ErrorCodeName(e.code()) << "] in stage " << e.stage() << ": "
              << e.what() << "\n";
    return ExitCodeFor(e.code());
  } catch (const Error& e) {
    std::cerr << "error [" << ErrorCodeName(e.code()) << "]: " << e.what() << "\n";
    return ExitCodeFor(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitOther;
  }
  return kExitOther;
}
