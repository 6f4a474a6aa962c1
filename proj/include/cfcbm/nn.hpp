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

#include <concepts>
#include <random>
#include <string>
#include <type_traits>

#include "cfcbm/gaussian.hpp"

// Batched layers. Samples are stored as columns: an input batch of n samples
// with width k is a k x n matrix.

namespace cfcbm::nn {

inline constexpr double kLogVarMin = -10.0;
inline constexpr double kLogVarMax = 10.0;

struct Linear {
  Matrix weight;  // out x in
  Vector bias;    // out

  Linear() = default;
  Linear(Eigen::Index in, Eigen::Index out);

  Eigen::Index in() const { return weight.cols(); }
  Eigen::Index out() const { return weight.rows(); }

  Matrix Forward(const Matrix& input) const;

  /// Accumulates parameter gradients into `grad` and returns d(loss)/d(input).
  Matrix Backward(const Matrix& input, const Matrix& d_output, Linear& grad) const;

  /// Uniform(-1/sqrt(in), 1/sqrt(in)) weights, zero bias.
  void InitUniform(std::mt19937_64& rng);
  void SetZero();
};

/// Linear -> tanh -> Linear.
struct Mlp {
  Linear hidden;
  Linear output;

  struct Cache {
    Matrix input;
    Matrix activation;  // tanh(hidden(input))
  };

  Mlp() = default;
  Mlp(Eigen::Index in, Eigen::Index width, Eigen::Index out);

  Matrix Forward(const Matrix& input, Cache* cache = nullptr) const;
  Matrix Backward(const Cache& cache, const Matrix& d_output, Mlp& grad) const;
};

/// Shared tanh trunk with separate mean and log-variance heads. Log-variance
/// is clamped to [kLogVarMin, kLogVarMax].
struct GaussianNet {
  Linear trunk;
  Linear mean_head;
  Linear log_var_head;

  struct Cache {
    Matrix input;
    Matrix activation;
    Matrix raw_log_var;
  };

  struct Output {
    Matrix mean;
    Matrix log_var;
  };

  GaussianNet() = default;
  GaussianNet(Eigen::Index in, Eigen::Index width, Eigen::Index latent);

  Output Forward(const Matrix& input, Cache* cache = nullptr) const;
  Matrix Backward(const Cache& cache, const Matrix& d_mean, const Matrix& d_log_var,
                  GaussianNet& grad) const;
};

Matrix Sigmoid(const Matrix& logits);

/// Column-wise softmax with max-shift.
Matrix SoftmaxColumns(const Matrix& logits);

/// Calls fn(name, tensor) on every weight matrix and bias vector. Works on
/// const and mutable layers; `fn` receives a Matrix or Vector reference.
template <class Layer, class Fn>
  requires std::same_as<std::remove_const_t<Layer>, Linear>
void ForEachTensor(const std::string& prefix, Layer& layer, Fn&& fn) {
  fn(prefix + ".weight", layer.weight);
  fn(prefix + ".bias", layer.bias);
}

template <class Net, class Fn>
  requires std::same_as<std::remove_const_t<Net>, Mlp>
void ForEachTensor(const std::string& prefix, Net& net, Fn&& fn) {
  ForEachTensor(prefix + ".hidden", net.hidden, fn);
  ForEachTensor(prefix + ".output", net.output, fn);
}

template <class Net, class Fn>
  requires std::same_as<std::remove_const_t<Net>, GaussianNet>
void ForEachTensor(const std::string& prefix, Net& net, Fn&& fn) {
  ForEachTensor(prefix + ".trunk", net.trunk, fn);
  ForEachTensor(prefix + ".mean", net.mean_head, fn);
  ForEachTensor(prefix + ".log_var", net.log_var_head, fn);
}

}  // namespace cfcbm::nn
