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
#include <random>
#include <vector>

#include "cfcbm/dataset.hpp"
#include "cfcbm/loss.hpp"
#include "cfcbm/model.hpp"

// Reference implementations written with plain loops and std containers.
// They share no code with the library beyond reading parameter values.
namespace cfcbm::oracle {

using Vec = std::vector<double>;

struct Terms {
  double concept_bce = 0, task_ce = 0, validity_ce = 0, kl_z = 0, kl_z_prime = 0,
         prior_distance = 0, posterior_distance = 0, total = 0;
};

/// Scalar re-derivation of the joint objective for a batch (columns are
/// samples), reparameterization noise supplied per sample.
Terms ScalarLoss(const ModelParams& p, const Batch& batch, const LossWeights& w,
                 const std::vector<Vec>& z_noise, const std::vector<Vec>& z_prime_noise,
                 const std::vector<int>& y_prime);

/// KL(N(ma, exp(la)) || N(mb, exp(lb))) by Monte Carlo over `samples` draws.
double MonteCarloKl(const Vec& ma, const Vec& la, const Vec& mb, const Vec& lb, int samples,
                    std::mt19937_64& rng);

/// Minimum Hamming distance from `c` to any row of class `target`, found by
/// enumerating every binary vector in order of increasing distance.
int BruteForceSparsity(const Vec& c, int target, const std::vector<Vec>& rows,
                       const std::vector<int>& labels);

struct GradCheck {
  double max_rel_error = 0.0;
  long checked = 0;
};

/// Central finite differences of the library loss against its analytic
/// gradient for every parameter.
GradCheck CheckGradients(const ModelParams& p, const Batch& batch, const LossWeights& w,
                         const LossNoise& noise, double step = 1e-5);

}  // namespace cfcbm::oracle
