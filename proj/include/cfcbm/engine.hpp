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

#include <random>
#include <utility>
#include <vector>

#include "cfcbm/model.hpp"

namespace cfcbm {

/// Best bet uses posterior means and 0.5 thresholds; multiverse samples.
enum class InferenceMode { kBestBet, kMultiverse };

std::string InferenceModeName(InferenceMode mode);
InferenceMode ParseInferenceMode(const std::string& name);

inline constexpr double kConceptThreshold = 0.5;

struct Prediction {
  LatentSample z;
  Vector concept_probs;
  Vector concepts;     // binary
  Vector class_probs;  // f(concepts)
  int label = 0;
};

struct Counterfactual {
  int target = 0;
  Vector concept_probs;
  Vector concepts;
  Vector class_probs;
  int label = 0;
  int sparsity = 0;  // Hamming distance to the factual concepts
  bool valid = false;
};

struct InterventionSet {
  std::vector<std::pair<Eigen::Index, double>> entries;  // (concept index, 0 or 1)
};

struct InterventionResult {
  Vector concepts;
  Vector class_probs;
  int label = 0;
};

Vector ThresholdConcepts(const Vector& probs, double threshold = kConceptThreshold);

int HammingDistance(const Vector& a, const Vector& b);

/// Encodes x, decodes concepts and classifies them. The task head is applied
/// to the binary concept vector.
Prediction Predict(const ModelParams& model, const Vector& x, InferenceMode mode,
                   std::mt19937_64& rng);

/// Overwrites the listed concepts and re-runs only the task head.
InterventionResult Intervene(const ModelParams& model, const Prediction& pred,
                             const InterventionSet& iv);

/// Samples the counterfactual posterior q(z' | z, c, y, y') built from the
/// prediction. Best bet returns exactly one counterfactual from the posterior
/// mean; multiverse returns `n_samples` independent draws.
std::vector<Counterfactual> Imagine(const ModelParams& model, const Prediction& pred,
                                    int target, InferenceMode mode, int n_samples,
                                    std::mt19937_64& rng);

/// Draws counterfactuals from the learnable prior p(z' | z, c, y), i.e.
/// without a requested class. `target` of each result is set to its own label.
std::vector<Counterfactual> ImagineFromPrior(const ModelParams& model, const Prediction& pred,
                                             int n_samples, std::mt19937_64& rng);

/// Predict followed by Imagine with the corrected class as target.
Counterfactual TaskDrivenIntervention(const ModelParams& model, const Vector& x,
                                      int corrected_class, InferenceMode mode,
                                      std::mt19937_64& rng);

/// Same, starting from an existing (possibly perturbed) prediction.
Counterfactual TaskDrivenIntervention(const ModelParams& model, const Prediction& pred,
                                      int corrected_class, InferenceMode mode,
                                      std::mt19937_64& rng);

/// Best-bet predictions for a column-major feature batch (d x n).
std::vector<Prediction> PredictBatch(const ModelParams& model, const Matrix& features);

}  // namespace cfcbm
