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

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cfcbm/dataset.hpp"
#include "cfcbm/errors.hpp"
#include "cfcbm/posthoc.hpp"
#include "cfcbm/report.hpp"
#include "cfcbm/train.hpp"

namespace cfcbm {

struct DatasetSpec {
  std::string kind = "dsprites";  // dsprites | dsprites_confounded | mnist_add | csv
  Eigen::Index n = 10000;
  std::optional<double> confound_rate;  // dsprites_confounded defaults to 0.85
  std::filesystem::path path;           // csv only
  /// Fixed data seed; when absent each run uses its own seed.
  std::optional<std::uint64_t> seed;
  SplitSpec split;
};

struct ExperimentConfig {
  std::string name = "experiment";
  DatasetSpec dataset;
  TrainConfig train;                  // CF-CBM (or whatever train.mode says)
  std::optional<TrainConfig> baseline;  // plain CBM + post-hoc search when set
  SearchConfig search;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  std::vector<std::string> metrics;
  std::filesystem::path output_dir = "runs/experiment";
  int multiverse_samples = 10;
  std::vector<double> noise_levels = {0.1, 0.3, 0.5};
  bool parallel_seeds = false;

  void Validate() const;
};

/// Every metric name run_experiment understands.
const std::vector<std::string>& KnownMetrics();

ExperimentConfig ExperimentConfigFromJson(const nlohmann::json& doc);
ExperimentConfig LoadExperimentConfig(const std::filesystem::path& path);

Dataset MaterializeDataset(const DatasetSpec& spec, std::uint64_t run_seed);

/// Failure of one pipeline stage (data, train, eval, report).
class StageError : public Error {
 public:
  StageError(std::string stage, ErrorCode code, const std::string& message)
      : Error(code, stage + ": " + message), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct ExperimentResult {
  MetricReport report;
  nlohmann::json timings;  // wall-clock figures, kept out of the report
};

/// Runs every seed: build data, train the configured model (and the baseline
/// when requested), evaluate the requested metrics on the test split and
/// aggregate. Writes report.json, report.md, timings.json and per-seed
/// checkpoints and training histories under `output_dir`. A failing seed's
/// directory is moved under `output_dir/failed/` before the StageError
/// propagates.
ExperimentResult RunExperiment(const ExperimentConfig& config);

/// Threads available for parallel seeds: CFX_THREADS if set, else hardware.
int ThreadBudget();

}  // namespace cfcbm
