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

#include "cfcbm/posthoc.hpp"

#include <limits>

#include "cfcbm/errors.hpp"

namespace cfcbm {

void SearchConfig::Validate() const {
  if (!(max_radius > 0.0)) throw Error(ErrorCode::kConfigError, "max_radius must be > 0");
  if (radius_steps < 1 || samples_per_radius < 1) {
    throw Error(ErrorCode::kConfigError, "search counts must be >= 1");
  }
}

PosthocResult PosthocSearch(const ModelParams& model, const Vector& x, int target,
                            const SearchConfig& config) {
  config.Validate();
  if (model.mode != ModelMode::kCbm) {
    throw Error(ErrorCode::kUnsupportedOperation, "post-hoc search expects a cbm-mode model");
  }
  if (target < 0 || target >= model.dims.classes) {
    throw Error(ErrorCode::kInvalidInput, "target class out of range");
  }
  std::mt19937_64 rng(config.seed);
  std::mt19937_64 unused_rng(0);
  const Prediction factual = Predict(model, x, InferenceMode::kBestBet, unused_rng);
  const Eigen::Index h = model.dims.latent;

  PosthocResult result;
  for (int step = 0; step <= config.radius_steps; ++step) {
    const double radius = config.max_radius * step / config.radius_steps;
    const Eigen::Index count = step == 0 ? 1 : config.samples_per_radius;
    Matrix directions = Matrix::Zero(h, count);
    if (step > 0) {
      directions = StandardNormal(h, count, rng);
      directions.colwise().normalize();
    }
    const Matrix candidates = (radius * directions).colwise() + factual.z.values;
    const Matrix probs = nn::Sigmoid(model.concept_decoder.Forward(candidates));
    const Matrix concepts = (probs.array() >= kConceptThreshold).cast<double>().matrix();
    const Matrix class_probs = nn::SoftmaxColumns(model.task_head.Forward(concepts));
    result.candidates_evaluated += static_cast<int>(count);

    Eigen::Index best = -1;
    int best_sparsity = std::numeric_limits<int>::max();
    double best_norm = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < count; ++j) {
      if (Argmax(class_probs.col(j)) != target) continue;
      const int sparsity = HammingDistance(factual.concepts, concepts.col(j));
      const double norm = (radius * directions.col(j)).norm();
      if (sparsity < best_sparsity || (sparsity == best_sparsity && norm < best_norm)) {
        best = j;
        best_sparsity = sparsity;
        best_norm = norm;
      }
    }
    if (best >= 0) {
      Counterfactual cf;
      cf.target = target;
      cf.concept_probs = probs.col(best);
      cf.concepts = concepts.col(best);
      cf.class_probs = class_probs.col(best);
      cf.label = target;
      cf.sparsity = best_sparsity;
      cf.valid = true;
      result.counterfactual = std::move(cf);
      result.radius = radius;
      return result;
    }
  }
  return result;
}

}  // namespace cfcbm
