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

#include "cfcbm/loss.hpp"
#include "oracle.hpp"
#include "support.hpp"

using namespace cfcbm;

namespace {

std::vector<oracle::Vec> Columns(const Matrix& m) {
  std::vector<oracle::Vec> out;
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    out.emplace_back(m.col(j).data(), m.col(j).data() + m.rows());
  }
  return out;
}

void CheckAgainstOracle(const ModelParams& p, const Batch& b, const LossWeights& w,
                        const LossNoise& noise, double tol) {
  const auto got = CfCbmLoss(p, b, w, noise);
  const auto want = oracle::ScalarLoss(p, b, w, Columns(noise.z), Columns(noise.z_prime),
                                       noise.y_prime);
  CHECK(std::abs(got.concept_bce - want.concept_bce) < tol);
  CHECK(std::abs(got.task_ce - want.task_ce) < tol);
  CHECK(std::abs(got.validity_ce - want.validity_ce) < tol);
  CHECK(std::abs(got.kl_z - want.kl_z) < tol);
  CHECK(std::abs(got.kl_z_prime - want.kl_z_prime) < tol);
  CHECK(std::abs(got.prior_distance - want.prior_distance) < tol);
  CHECK(std::abs(got.posterior_distance - want.posterior_distance) < tol);
  CHECK(std::abs(got.total - want.total) < tol);
}

}  // namespace

TEST_CASE("loss matches the scalar oracle with zero noise") {
  const ModelParams p = testing::MicroModel();
  const Batch b = testing::MicroBatch();
  CheckAgainstOracle(p, b, LossWeights::DspritesCfCbm(), ZeroLossNoise(p.dims, {0, 1, 0, 1}),
                     1e-8);
}

TEST_CASE("loss matches the scalar oracle with sampled noise") {
  const ModelParams p = testing::MicroModel(4);
  const Batch b = testing::MicroBatch();
  std::mt19937_64 rng(8);
  CheckAgainstOracle(p, b, LossWeights::MnistAddCfCbm(), DrawLossNoise(p.dims, b.labels, rng),
                     1e-8);
}

TEST_CASE("analytic gradients match finite differences") {
  const ModelParams p = testing::MicroModel();
  const Batch b = testing::MicroBatch();
  std::mt19937_64 rng(21);
  const auto noise = DrawLossNoise(p.dims, b.labels, rng);
  const auto check = oracle::CheckGradients(p, b, LossWeights::DspritesCfCbm(), noise);
  CHECK(check.checked == p.ParameterCount());
  CHECK(check.max_rel_error < 1e-3);
}

TEST_CASE("cbm mode skips the counterfactual branch") {
  ModelParams p = testing::MicroModel();
  p.mode = ModelMode::kCbm;
  const Batch b = testing::MicroBatch();
  std::mt19937_64 rng(1);
  LossNoise noise;
  noise.z = StandardNormal(p.dims.latent, b.size(), rng);
  const auto t = CfCbmLoss(p, b, LossWeights::PlainCbm(), noise);
  CHECK(t.validity_ce == 0.0);
  CHECK(t.kl_z_prime == 0.0);
  CHECK(t.total == doctest::Approx(t.concept_bce + 0.1 * t.task_ce));

  ModelParams grads = p.ZerosLike();
  CfCbmLoss(p, b, LossWeights::PlainCbm(), noise, &grads);
  CHECK(grads.cf_posterior.trunk.weight.isZero());
  CHECK(grads.cf_prior.mean_head.bias.isZero());
  CHECK_FALSE(grads.encoder.trunk.weight.isZero());
}

TEST_CASE("weighted total") {
  LossBreakdown t{1, 2, 3, 4, 5, 6, 7, 0};
  LossWeights w{.concept_bce = 1, .task = 1, .validity = 1, .kl_z = 1, .kl_z_prime = 1,
                .prior_distance = 1, .posterior_distance = 1};
  CHECK(WeightedTotal(t, w) == doctest::Approx(28.0));
  CHECK(LossWeights::DspritesCfCbm().HasCounterfactualTerms());
  CHECK_FALSE(LossWeights::PlainCbm().HasCounterfactualTerms());
}

TEST_CASE("excluded true class never appears as a target") {
  const Dims dims{.features = 2, .concepts = 2, .classes = 3, .latent = 2};
  std::vector<int> labels(500);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 3);
  std::mt19937_64 rng(5);
  const auto noise = DrawLossNoise(dims, labels, rng, true);
  for (std::size_t i = 0; i < labels.size(); ++i) CHECK(noise.y_prime[i] != labels[i]);
  const auto any = DrawLossNoise(dims, labels, rng, false);
  int same = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) same += any.y_prime[i] == labels[i];
  CHECK(same > 100);
}

TEST_CASE("non-finite loss raises divergence with the breakdown") {
  ModelParams p = testing::MicroModel();
  p.task_head.bias(0) = NAN;
  const Batch b = testing::MicroBatch();
  try {
    CfCbmLoss(p, b, LossWeights::DspritesCfCbm(), ZeroLossNoise(p.dims, {0, 0, 0, 0}));
    FAIL("expected divergence");
  } catch (const TrainingDivergence& e) {
    CHECK(e.code() == ErrorCode::kTrainingDivergence);
    CHECK(std::isnan(e.breakdown().task_ce));
  }
}

TEST_CASE("shape errors") {
  const ModelParams p = testing::MicroModel();
  Batch b = testing::MicroBatch();
  b.labels[0] = 5;
  CHECK_THROWS_AS(CfCbmLoss(p, b, LossWeights{}, ZeroLossNoise(p.dims, {0, 0, 0, 0})), Error);
}
