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

#include "cfcbm/gaussian.hpp"

#include <cmath>
#include <string>

#include "cfcbm/errors.hpp"

namespace cfcbm {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidDimension: return "invalid_dimension";
    case ErrorCode::kInvalidInput: return "invalid_input";
    case ErrorCode::kTrainingDivergence: return "training_divergence";
    case ErrorCode::kCorruptFile: return "corrupt_file";
    case ErrorCode::kVersionMismatch: return "version_mismatch";
    case ErrorCode::kUnsupportedOperation: return "unsupported_operation";
    case ErrorCode::kParseError: return "parse_error";
    case ErrorCode::kValidationError: return "validation_error";
    case ErrorCode::kUndefinedMetric: return "undefined_metric";
    case ErrorCode::kConfigError: return "config_error";
    case ErrorCode::kNotFound: return "not_found";
  }
  return "unknown";
}

GaussianDiag GaussianDiag::Standard(Eigen::Index dim) {
  return {Vector::Zero(dim), Vector::Zero(dim)};
}

void ValidateGaussian(const GaussianDiag& dist) {
  if (dist.mean.size() != dist.log_var.size()) {
    throw Error(ErrorCode::kInvalidInput, "gaussian mean/log_var length mismatch");
  }
  if (!dist.mean.allFinite() || !dist.log_var.allFinite()) {
    throw Error(ErrorCode::kInvalidInput, "gaussian parameters must be finite");
  }
}

LatentSample SampleGaussian(const GaussianDiag& dist, const Vector& noise,
                            LatentSource source) {
  if (noise.size() != dist.size() || dist.log_var.size() != dist.size()) {
    throw Error(ErrorCode::kInvalidInput,
                "noise length " + std::to_string(noise.size()) +
                    " does not match latent size " + std::to_string(dist.size()));
  }
  LatentSample out;
  out.source = source;
  out.values = dist.mean.array() + (0.5 * dist.log_var.array()).exp() * noise.array();
  return out;
}

double KlDiagGaussian(const GaussianDiag& a, const GaussianDiag& b) {
  ValidateGaussian(a);
  ValidateGaussian(b);
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kInvalidInput, "KL between gaussians of different size");
  }
  const auto diff = (a.mean - b.mean).array();
  const auto terms = b.log_var.array() - a.log_var.array() +
                     (a.log_var.array().exp() + diff.square()) / b.log_var.array().exp() - 1.0;
  return 0.5 * terms.sum();
}

Vector StandardNormal(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector out(n);
  for (Eigen::Index i = 0; i < n; ++i) out[i] = normal(rng);
  return out;
}

Matrix StandardNormal(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix out(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) out(i, j) = normal(rng);
  }
  return out;
}

}  // namespace cfcbm
