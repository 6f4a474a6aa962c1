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

#include "cfcbm/train.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>

#include "cfcbm/engine.hpp"
#include "cfcbm/errors.hpp"
#include "cfcbm/metrics.hpp"
#include "cfcbm/optimizer.hpp"

namespace cfcbm {

using nlohmann::json;

void TrainConfig::Validate() const {
  if (epochs < 1) throw Error(ErrorCode::kConfigError, "epochs must be >= 1");
  if (batch_size < 1) throw Error(ErrorCode::kConfigError, "batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw Error(ErrorCode::kConfigError, "learning_rate must be > 0");
  if (latent < 1) throw Error(ErrorCode::kConfigError, "latent must be >= 1");
  const LossWeights& w = weights;
  for (double v : {w.concept_bce, w.task, w.validity, w.kl_z, w.kl_z_prime, w.prior_distance,
                   w.posterior_distance}) {
    if (!(v >= 0.0)) throw Error(ErrorCode::kConfigError, "loss weights must be >= 0");
  }
}

json LossWeightsToJson(const LossWeights& w) {
  return {{"concept", w.concept_bce},
          {"task", w.task},
          {"validity", w.validity},
          {"kl_z", w.kl_z},
          {"kl_z_prime", w.kl_z_prime},
          {"prior_distance", w.prior_distance},
          {"posterior_distance", w.posterior_distance}};
}

LossWeights LossWeightsFromJson(const json& doc, LossWeights w) {
  if (doc.is_string()) {
    const auto name = doc.get<std::string>();
    if (name == "dsprites") return LossWeights::DspritesCfCbm();
    if (name == "mnist_add") return LossWeights::MnistAddCfCbm();
    if (name == "cbm") return LossWeights::PlainCbm();
    throw Error(ErrorCode::kConfigError, "unknown weight preset '" + name + "'");
  }
  w.concept_bce = doc.value("concept", w.concept_bce);
  w.task = doc.value("task", w.task);
  w.validity = doc.value("validity", w.validity);
  w.kl_z = doc.value("kl_z", w.kl_z);
  w.kl_z_prime = doc.value("kl_z_prime", w.kl_z_prime);
  w.prior_distance = doc.value("prior_distance", w.prior_distance);
  w.posterior_distance = doc.value("posterior_distance", w.posterior_distance);
  return w;
}

TrainConfig TrainConfigFromJson(const json& doc, TrainConfig c) {
  try {
    c.epochs = doc.value("epochs", c.epochs);
    c.batch_size = doc.value("batch_size", c.batch_size);
    c.learning_rate = doc.value("learning_rate", c.learning_rate);
    c.seed = doc.value("seed", c.seed);
    if (doc.contains("mode")) c.mode = ParseModelMode(doc.at("mode").get<std::string>());
    c.latent = doc.value("latent", c.latent);
    c.exclude_true_class = doc.value("exclude_true_class", c.exclude_true_class);
    if (doc.contains("weights")) c.weights = LossWeightsFromJson(doc.at("weights"), c.weights);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfigError, std::string("bad training config: ") + e.what());
  }
  c.Validate();
  return c;
}

json TrainConfigToJson(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"seed", c.seed},
          {"mode", ModelModeName(c.mode)},
          {"latent", c.latent},
          {"exclude_true_class", c.exclude_true_class},
          {"weights", LossWeightsToJson(c.weights)}};
}

double ValidationValidity(const ModelParams& model, const Dataset& ds, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto preds = PredictBatch(model, ds.features.transpose());
  const int classes = static_cast<int>(model.dims.classes);
  if (classes < 2) return 100.0;
  std::uniform_int_distribution<int> pick(0, classes - 2);
  std::vector<Counterfactual> cfs;
  cfs.reserve(preds.size());
  for (const auto& p : preds) {
    int target = pick(rng);
    if (target >= p.label) ++target;
    cfs.push_back(Imagine(model, p, target, InferenceMode::kBestBet, 1, rng).front());
  }
  return metrics::Validity(cfs);
}

TrainResult Train(const ModelParams& init, const Dataset& train_set, const Dataset& val_set,
                  const TrainConfig& config) {
  config.Validate();
  const Dims& d = init.dims;
  if (train_set.meta.features != d.features || train_set.meta.concepts != d.concepts ||
      train_set.meta.classes != d.classes || val_set.meta.features != d.features ||
      val_set.meta.concepts != d.concepts || val_set.meta.classes != d.classes) {
    throw Error(ErrorCode::kInvalidInput, "dataset dimensions do not match the model");
  }
  if (train_set.size() == 0) throw Error(ErrorCode::kInvalidInput, "empty training set");

  ModelParams params = init;
  params.mode = config.mode;
  LossWeights weights = config.weights;
  if (config.mode == ModelMode::kCbm) {
    weights.validity = weights.kl_z_prime = weights.prior_distance = weights.posterior_distance =
        0.0;
  }

  Adam optimizer(params, {.learning_rate = config.learning_rate});
  std::mt19937_64 rng(config.seed);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(train_set.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  TrainResult result;
  double best_score = -1.0;
  long step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    int batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_index) {
      const auto len = std::min<std::size_t>(config.batch_size, order.size() - start);
      const Batch batch = train_set.MakeBatch(std::span(order).subspan(start, len));
      LossNoise noise;
      if (config.mode == ModelMode::kCfCbm) {
        noise = DrawLossNoise(d, batch.labels, rng, config.exclude_true_class);
      } else {
        noise.z = StandardNormal(d.latent, batch.size(), rng);
      }
      ModelParams grads = params.ZerosLike();
      LossBreakdown loss;
      try {
        loss = CfCbmLoss(params, batch, weights, noise, &grads);
      } catch (const TrainingDivergence& e) {
        throw TrainingDivergence("epoch " + std::to_string(epoch) + " batch " +
                                     std::to_string(batch_index) + ": " + e.what(),
                                 e.breakdown());
      }
      optimizer.Step(params, grads);
      result.history.steps.push_back({step++, epoch, loss});
    }

    EpochRecord record;
    record.epoch = epoch;
    if (val_set.size() > 0) {
      try {
        record.val_task_auc = metrics::EvaluateGeneralization(params, val_set).task_auc;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kUndefinedMetric) throw;
        record.val_task_auc = 0.5;  // single-class validation set
      }
      if (config.mode == ModelMode::kCfCbm) {
        record.val_validity = ValidationValidity(params, val_set, config.seed ^ 0x9e3779b97f4a7c15ULL);
        record.selection_score = 0.5 * record.val_task_auc + 0.5 * (*record.val_validity / 100.0);
      } else {
        record.selection_score = record.val_task_auc;
      }
    }
    result.history.epochs.push_back(record);
    if (record.selection_score >= best_score) {
      best_score = record.selection_score;
      result.best_params = params;
      result.history.best_epoch = epoch;
    }
  }
  return result;
}

TrainResult Train(const Dataset& train_set, const Dataset& val_set, const TrainConfig& config) {
  config.Validate();
  const Dims dims{train_set.meta.features, train_set.meta.concepts, train_set.meta.classes,
                  config.latent};
  return Train(InitParams(dims, config.seed, config.mode), train_set, val_set, config);
}

void WriteHistoryCsv(const TrainHistory& history, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kInvalidInput, "cannot write " + path.string());
  out.precision(10);
  out << "step,epoch,concept_bce,task_ce,validity_ce,kl_z,kl_z_prime,prior_distance,"
         "posterior_distance,total,val_task_auc,val_validity\n";
  for (std::size_t i = 0; i < history.steps.size(); ++i) {
    const auto& s = history.steps[i];
    const auto& l = s.loss;
    out << s.step << ',' << s.epoch << ',' << l.concept_bce << ',' << l.task_ce << ','
        << l.validity_ce << ',' << l.kl_z << ',' << l.kl_z_prime << ',' << l.prior_distance
        << ',' << l.posterior_distance << ',' << l.total << ',';
    const bool last_of_epoch =
        i + 1 == history.steps.size() || history.steps[i + 1].epoch != s.epoch;
    if (last_of_epoch && s.epoch < static_cast<int>(history.epochs.size())) {
      const auto& e = history.epochs[static_cast<std::size_t>(s.epoch)];
      out << e.val_task_auc << ',';
      if (e.val_validity) out << *e.val_validity;
    } else {
      out << ',';
    }
    out << '\n';
  }
}

}  // namespace cfcbm
