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

#include <Eigen/Dense>
#include <random>

namespace cfcbm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Diagonal Gaussian over a latent vector, parametrized by mean and
/// log-variance.
struct GaussianDiag {
  Vector mean;
  Vector log_var;

  Eigen::Index size() const { return mean.size(); }

  /// Standard normal N(0, I) of the given dimension.
  static GaussianDiag Standard(Eigen::Index dim);
};

enum class LatentSource { kPosteriorZ, kPosteriorZPrime, kPriorZ, kPriorZPrime };

struct LatentSample {
  Vector values;
  LatentSource source = LatentSource::kPosteriorZ;
};

/// Throws kInvalidInput unless both vectors have equal length and all entries
/// are finite.
void ValidateGaussian(const GaussianDiag& dist);

/// Reparameterized draw: mean + exp(0.5 * log_var) * noise.
LatentSample SampleGaussian(const GaussianDiag& dist, const Vector& noise,
                            LatentSource source = LatentSource::kPosteriorZ);

/// Closed-form KL(a || b) summed over dimensions.
double KlDiagGaussian(const GaussianDiag& a, const GaussianDiag& b);

/// Vector of i.i.d. standard normal draws.
Vector StandardNormal(Eigen::Index n, std::mt19937_64& rng);

/// Matrix of i.i.d. standard normal draws, filled column by column.
Matrix StandardNormal(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng);

}  // namespace cfcbm
