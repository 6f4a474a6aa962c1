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
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cfcbm/dataset.hpp"
#include "cfcbm/loss.hpp"
#include "cfcbm/model.hpp"

namespace cfcbm {

struct TrainConfig {
  int epochs = 75;
  int batch_size = 1024;
  double learning_rate = 0.005;
  std::uint64_t seed = 0;
  ModelMode mode = ModelMode::kCfCbm;
  LossWeights weights = LossWeights::DspritesCfCbm();
  Eigen::Index latent = 128;
  /// Draw training targets y' from the classes other than the true label.
  bool exclude_true_class = false;

  void Validate() const;
};

/// Keys: epochs, batch_size, learning_rate, seed, mode, latent,
/// exclude_true_class, and a `weights` object with concept, task, validity,
/// kl_z, kl_z_prime, prior_distance, posterior_distance. Missing keys keep
/// their defaults. `weights` may instead be a preset name: dsprites,
/// mnist_add or cbm.
TrainConfig TrainConfigFromJson(const nlohmann::json& doc, TrainConfig base = {});
nlohmann::json TrainConfigToJson(const TrainConfig& config);
nlohmann::json LossWeightsToJson(const LossWeights& w);
LossWeights LossWeightsFromJson(const nlohmann::json& doc, LossWeights base = {});

struct StepRecord {
  long step = 0;
  int epoch = 0;
  LossBreakdown loss;
};

struct EpochRecord {
  int epoch = 0;
  double val_task_auc = 0.0;
  std::optional<double> val_validity;  // percent, cfcbm only
  double selection_score = 0.0;
};

struct TrainHistory {
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
};

struct TrainResult {
  ModelParams best_params;
  TrainHistory history;
};

/// Mini-batch Adam over shuffled training rows. After each epoch the model is
/// scored on the validation set (task AUC, plus best-bet validity toward a
/// random other class in cfcbm mode) and the best-scoring parameters are kept.
///
/// Throws TrainingDivergence, with the message carrying epoch and batch
/// index, if a loss turns non-finite.
TrainResult Train(const ModelParams& init, const Dataset& train_set, const Dataset& val_set,
                  const TrainConfig& config);

/// Convenience: InitParams from the dataset shape, then Train.
TrainResult Train(const Dataset& train_set, const Dataset& val_set, const TrainConfig& config);

/// step,epoch,<loss terms>,total,val_task_auc,val_validity. Validation columns
/// are filled on the last step of each epoch.
void WriteHistoryCsv(const TrainHistory& history, const std::filesystem::path& path);

/// Best-bet validity (percent) toward a uniformly drawn class other than the
/// prediction, with a fixed draw seed.
double ValidationValidity(const ModelParams& model, const Dataset& ds, std::uint64_t seed);

}  // namespace cfcbm
