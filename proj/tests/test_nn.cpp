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

#include <doctest.h>

#include <cmath>

#include "cfcbm/nn.hpp"

using namespace cfcbm;

TEST_CASE("softmax of [2, 0]") {
  Matrix logits(2, 1);
  logits << 2.0, 0.0;
  const Matrix p = nn::SoftmaxColumns(logits);
  const double e2 = std::exp(2.0);
  CHECK(p(0, 0) == doctest::Approx(e2 / (e2 + 1.0)).epsilon(1e-12));
  CHECK(p(1, 0) == doctest::Approx(1.0 / (e2 + 1.0)).epsilon(1e-12));
}

TEST_CASE("softmax survives large logits") {
  Matrix logits(3, 1);
  logits << 1000.0, 999.0, -1000.0;
  const Matrix p = nn::SoftmaxColumns(logits);
  CHECK(p.allFinite());
  CHECK(p.sum() == doctest::Approx(1.0));
}

TEST_CASE("sigmoid") {
  Matrix x(1, 3);
  x << 0.0, 40.0, -40.0;
  const Matrix s = nn::Sigmoid(x);
  CHECK(s(0, 0) == doctest::Approx(0.5));
  CHECK(s(0, 1) == doctest::Approx(1.0));
  CHECK(s(0, 2) == doctest::Approx(0.0));
}

TEST_CASE("linear backward against finite differences") {
  std::mt19937_64 rng(2);
  nn::Linear layer(3, 2);
  layer.InitUniform(rng);
  Matrix x = StandardNormal(3, 4, rng);
  Matrix upstream = StandardNormal(2, 4, rng);
  auto loss = [&](const nn::Linear& l, const Matrix& in) {
    return (l.Forward(in).array() * upstream.array()).sum();
  };
  nn::Linear grad(3, 2);
  grad.SetZero();
  const Matrix dx = layer.Backward(x, upstream, grad);
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < layer.weight.size(); ++i) {
    nn::Linear up = layer, down = layer;
    up.weight.data()[i] += h;
    down.weight.data()[i] -= h;
    CHECK(grad.weight.data()[i] == doctest::Approx((loss(up, x) - loss(down, x)) / (2 * h)));
  }
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Matrix up = x, down = x;
    up.data()[i] += h;
    down.data()[i] -= h;
    CHECK(dx.data()[i] == doctest::Approx((loss(layer, up) - loss(layer, down)) / (2 * h)));
  }
}

TEST_CASE("log variance is clamped and its gradient masked") {
  std::mt19937_64 rng(4);
  nn::GaussianNet net(2, 3, 2);
  net.trunk.InitUniform(rng);
  net.mean_head.InitUniform(rng);
  net.log_var_head.SetZero();
  net.log_var_head.bias << 50.0, 0.0;
  nn::GaussianNet::Cache cache;
  const auto out = net.Forward(Matrix::Ones(2, 1), &cache);
  CHECK(out.log_var(0, 0) == doctest::Approx(nn::kLogVarMax));
  nn::GaussianNet grad(2, 3, 2);
  grad.trunk.SetZero();
  grad.mean_head.SetZero();
  grad.log_var_head.SetZero();
  net.Backward(cache, Matrix::Zero(2, 1), Matrix::Ones(2, 1), grad);
  CHECK(grad.log_var_head.bias(0) == 0.0);
  CHECK(grad.log_var_head.bias(1) == 1.0);
}

TEST_CASE("uniform init bounds") {
  std::mt19937_64 rng(0);
  nn::Linear layer(16, 8);
  layer.InitUniform(rng);
  CHECK(layer.weight.cwiseAbs().maxCoeff() <= 0.25);
  CHECK(layer.bias.isZero());
}
