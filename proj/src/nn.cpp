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

#include "cfcbm/nn.hpp"

#include <cmath>

namespace cfcbm::nn {

Linear::Linear(Eigen::Index in, Eigen::Index out)
    : weight(Matrix::Zero(out, in)), bias(Vector::Zero(out)) {}

Matrix Linear::Forward(const Matrix& input) const {
  Matrix out = weight * input;
  out.colwise() += bias;
  return out;
}

Matrix Linear::Backward(const Matrix& input, const Matrix& d_output, Linear& grad) const {
  grad.weight.noalias() += d_output * input.transpose();
  grad.bias += d_output.rowwise().sum();
  return weight.transpose() * d_output;
}

void Linear::InitUniform(std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in()));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Eigen::Index j = 0; j < weight.cols(); ++j) {
    for (Eigen::Index i = 0; i < weight.rows(); ++i) weight(i, j) = dist(rng);
  }
  bias.setZero();
}

void Linear::SetZero() {
  weight.setZero();
  bias.setZero();
}

Mlp::Mlp(Eigen::Index in, Eigen::Index width, Eigen::Index out)
    : hidden(in, width), output(width, out) {}

Matrix Mlp::Forward(const Matrix& input, Cache* cache) const {
  Matrix act = hidden.Forward(input).array().tanh().matrix();
  Matrix out = output.Forward(act);
  if (cache != nullptr) {
    cache->input = input;
    cache->activation = std::move(act);
  }
  return out;
}

Matrix Mlp::Backward(const Cache& cache, const Matrix& d_output, Mlp& grad) const {
  Matrix d_act = output.Backward(cache.activation, d_output, grad.output);
  Matrix d_pre = (d_act.array() * (1.0 - cache.activation.array().square())).matrix();
  return hidden.Backward(cache.input, d_pre, grad.hidden);
}

GaussianNet::GaussianNet(Eigen::Index in, Eigen::Index width, Eigen::Index latent)
    : trunk(in, width), mean_head(width, latent), log_var_head(width, latent) {}

GaussianNet::Output GaussianNet::Forward(const Matrix& input, Cache* cache) const {
  Matrix act = trunk.Forward(input).array().tanh().matrix();
  Output out;
  out.mean = mean_head.Forward(act);
  Matrix raw = log_var_head.Forward(act);
  out.log_var = raw.cwiseMax(kLogVarMin).cwiseMin(kLogVarMax);
  if (cache != nullptr) {
    cache->input = input;
    cache->activation = std::move(act);
    cache->raw_log_var = std::move(raw);
  }
  return out;
}

Matrix GaussianNet::Backward(const Cache& cache, const Matrix& d_mean,
                             const Matrix& d_log_var, GaussianNet& grad) const {
  const Matrix d_raw =
      ((cache.raw_log_var.array() >= kLogVarMin && cache.raw_log_var.array() <= kLogVarMax)
           .select(d_log_var.array(), 0.0))
          .matrix();
  Matrix d_act = mean_head.Backward(cache.activation, d_mean, grad.mean_head);
  d_act += log_var_head.Backward(cache.activation, d_raw, grad.log_var_head);
  Matrix d_pre = (d_act.array() * (1.0 - cache.activation.array().square())).matrix();
  return trunk.Backward(cache.input, d_pre, grad.trunk);
}

Matrix Sigmoid(const Matrix& logits) {
  return (1.0 / (1.0 + (-logits.array()).exp())).matrix();
}

Matrix SoftmaxColumns(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const double peak = logits.col(j).maxCoeff();
    out.col(j) = (logits.col(j).array() - peak).exp().matrix();
    out.col(j) /= out.col(j).sum();
  }
  return out;
}

}  // namespace cfcbm::nn
