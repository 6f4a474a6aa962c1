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
#include <span>
#include <string>
#include <vector>

#include "cfcbm/errors.hpp"
#include "cfcbm/model.hpp"

namespace cfcbm {

/// Column-major mini-batch: one sample per column.
struct Batch {
  Matrix features;          // d x n
  Matrix concepts;          // r x n, entries in {0,1}
  std::vector<int> labels;  // n

  Eigen::Index size() const { return features.cols(); }
};

/// Weights of the seven loss terms. A plain CBM zeroes the four
/// counterfactual weights.
struct LossWeights {
  double concept_bce = 1.0;          // concept BCE
  double task = 1.0;                 // task CE
  double validity = 0.0;             // CE of the counterfactual prediction vs y'
  double kl_z = 0.0;                 // KL[q(z|x) || N(0,I)]
  double kl_z_prime = 0.0;           // KL[q(z'|a) || p(z'|z,c,y)]
  double prior_distance = 0.0;       // KL[N(0,I) || p(z'|z,c,y)]
  double posterior_distance = 0.0;   // KL[q(z|x) || q(z'|a)]

  /// dSprites column of the published loss-weight table.
  static LossWeights DspritesCfCbm();
  static LossWeights MnistAddCfCbm();
  /// Concept 1.0, task 0.1; everything else zero.
  static LossWeights PlainCbm();

  bool HasCounterfactualTerms() const {
    return validity != 0.0 || kl_z_prime != 0.0 || prior_distance != 0.0 ||
           posterior_distance != 0.0;
  }
};

struct LossBreakdown {
  double concept_bce = 0.0;
  double task_ce = 0.0;
  double validity_ce = 0.0;
  double kl_z = 0.0;
  double kl_z_prime = 0.0;
  double prior_distance = 0.0;
  double posterior_distance = 0.0;
  double total = 0.0;

  std::string ToString() const;
};

double WeightedTotal(const LossBreakdown& terms, const LossWeights& weights);

/// All randomness consumed by one loss evaluation. Passing it explicitly
/// lets tests pin the reparameterization noise and the sampled targets.
struct LossNoise {
  Matrix z;                     // h x n
  Matrix z_prime;               // h x n
  std::vector<int> y_prime;     // n
};

LossNoise DrawLossNoise(const Dims& dims, std::span<const int> labels, std::mt19937_64& rng,
                        bool exclude_true_class = false);

LossNoise ZeroLossNoise(const Dims& dims, std::vector<int> y_prime);

class TrainingDivergence : public Error {
 public:
  TrainingDivergence(const std::string& message, LossBreakdown breakdown)
      : Error(ErrorCode::kTrainingDivergence, message), breakdown_(breakdown) {}

  const LossBreakdown& breakdown() const { return breakdown_; }

 private:
  LossBreakdown breakdown_;
};

/// Evaluates the joint objective on a batch. Every term is averaged over the
/// batch; the concept BCE is also averaged over concepts and the KL
/// terms over latent dimensions. When `grads` is non-null, gradients of the
/// total are accumulated into it.
///
/// In ModelMode::kCbm the counterfactual branch is not evaluated and its
/// terms are reported as zero.
///
/// Throws TrainingDivergence if any term is not finite.
LossBreakdown CfCbmLoss(const ModelParams& params, const Batch& batch,
                        const LossWeights& weights, const LossNoise& noise,
                        ModelParams* grads = nullptr);

LossBreakdown CfCbmLoss(const ModelParams& params, const Batch& batch,
                        const LossWeights& weights, std::mt19937_64& rng,
                        ModelParams* grads = nullptr);

}  // namespace cfcbm
