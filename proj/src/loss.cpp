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

#include "cfcbm/loss.hpp"

#include <cmath>
#include <sstream>

namespace cfcbm {

namespace {

struct KlGrads {
  Matrix mean_a, log_var_a, mean_b, log_var_b;
};

// Batched KL(a || b), averaged over samples and latent dimensions. When
// `grads` is set, writes d(scale * KL)/d(inputs).
double BatchKl(const Matrix& mean_a, const Matrix& log_var_a, const Matrix& mean_b,
               const Matrix& log_var_b, double scale, KlGrads* grads) {
  const double n = static_cast<double>(mean_a.size());
  const auto diff = (mean_a - mean_b).array();
  const auto inv_var_b = (-log_var_b.array()).exp();
  const auto var_a = log_var_a.array().exp();
  const double kl =
      0.5 * (log_var_b.array() - log_var_a.array() + (var_a + diff.square()) * inv_var_b - 1.0)
                .sum() /
      n;
  if (grads != nullptr) {
    const double s = scale / n;
    grads->mean_a = (s * diff * inv_var_b).matrix();
    grads->mean_b = -grads->mean_a;
    grads->log_var_a = (0.5 * s * (var_a * inv_var_b - 1.0)).matrix();
    grads->log_var_b = (0.5 * s * (1.0 - (var_a + diff.square()) * inv_var_b)).matrix();
  }
  return kl;
}

// Mean BCE between sigmoid(logits) and targets, via softplus for stability.
double BceWithLogits(const Matrix& logits, const Matrix& targets) {
  const auto x = logits.array();
  const auto softplus = x.max(0.0) + (1.0 + (-x.abs()).exp()).log();
  return (softplus - targets.array() * x).sum() / static_cast<double>(logits.size());
}

double CrossEntropy(const Matrix& probs, std::span<const int> targets) {
  double total = 0.0;
  for (Eigen::Index j = 0; j < probs.cols(); ++j) {
    total -= std::log(std::max(probs(targets[j], j), 1e-300));
  }
  return total / static_cast<double>(probs.cols());
}

Matrix OneHotColumns(std::span<const int> labels, Eigen::Index classes) {
  Matrix out = Matrix::Zero(classes, static_cast<Eigen::Index>(labels.size()));
  for (std::size_t j = 0; j < labels.size(); ++j) {
    out(labels[j], static_cast<Eigen::Index>(j)) = 1.0;
  }
  return out;
}

void CheckBatch(const ModelParams& params, const Batch& batch, const LossNoise& noise) {
  const Dims& d = params.dims;
  const auto n = batch.size();
  if (n == 0) throw Error(ErrorCode::kInvalidInput, "empty batch");
  if (batch.features.rows() != d.features || batch.concepts.rows() != d.concepts ||
      batch.concepts.cols() != n || static_cast<Eigen::Index>(batch.labels.size()) != n) {
    throw Error(ErrorCode::kInvalidInput, "batch shape does not match model dimensions");
  }
  for (int y : batch.labels) {
    if (y < 0 || y >= d.classes) throw Error(ErrorCode::kInvalidInput, "label out of range");
  }
  if (noise.z.rows() != d.latent || noise.z.cols() != n) {
    throw Error(ErrorCode::kInvalidInput, "z noise shape mismatch");
  }
  if (params.mode == ModelMode::kCfCbm) {
    if (noise.z_prime.rows() != d.latent || noise.z_prime.cols() != n ||
        static_cast<Eigen::Index>(noise.y_prime.size()) != n) {
      throw Error(ErrorCode::kInvalidInput, "counterfactual noise shape mismatch");
    }
    for (int y : noise.y_prime) {
      if (y < 0 || y >= d.classes) throw Error(ErrorCode::kInvalidInput, "y' out of range");
    }
  }
}

}  // namespace

LossWeights LossWeights::DspritesCfCbm() {
  return {.concept_bce = 10.0,
          .task = 0.7,
          .validity = 0.3,
          .kl_z = 1.2,
          .kl_z_prime = 1.2,
          .prior_distance = 1.0,
          .posterior_distance = 0.6};
}

LossWeights LossWeights::MnistAddCfCbm() {
  return {.concept_bce = 10.0,
          .task = 1.0,
          .validity = 0.2,
          .kl_z = 2.0,
          .kl_z_prime = 2.0,
          .prior_distance = 1.7,
          .posterior_distance = 0.55};
}

LossWeights LossWeights::PlainCbm() { return {.concept_bce = 1.0, .task = 0.1}; }

std::string LossBreakdown::ToString() const {
  std::ostringstream os;
  os << "concept_bce=" << concept_bce << " task_ce=" << task_ce
     << " validity_ce=" << validity_ce << " kl_z=" << kl_z << " kl_z_prime=" << kl_z_prime
     << " prior_distance=" << prior_distance << " posterior_distance=" << posterior_distance
     << " total=" << total;
  return os.str();
}

double WeightedTotal(const LossBreakdown& t, const LossWeights& w) {
  return w.concept_bce * t.concept_bce + w.task * t.task_ce + w.validity * t.validity_ce +
         w.kl_z * t.kl_z + w.kl_z_prime * t.kl_z_prime + w.posterior_distance * t.posterior_distance +
         w.prior_distance * t.prior_distance;
}

LossNoise DrawLossNoise(const Dims& dims, std::span<const int> labels, std::mt19937_64& rng,
                        bool exclude_true_class) {
  const auto n = static_cast<Eigen::Index>(labels.size());
  LossNoise noise;
  noise.z = StandardNormal(dims.latent, n, rng);
  noise.z_prime = StandardNormal(dims.latent, n, rng);
  noise.y_prime.resize(labels.size());
  const bool exclude = exclude_true_class && dims.classes > 1;
  std::uniform_int_distribution<int> pick(0, static_cast<int>(dims.classes) - (exclude ? 2 : 1));
  for (std::size_t j = 0; j < labels.size(); ++j) {
    int y = pick(rng);
    if (exclude && y >= labels[j]) ++y;
    noise.y_prime[j] = y;
  }
  return noise;
}

LossNoise ZeroLossNoise(const Dims& dims, std::vector<int> y_prime) {
  const auto n = static_cast<Eigen::Index>(y_prime.size());
  return {Matrix::Zero(dims.latent, n), Matrix::Zero(dims.latent, n), std::move(y_prime)};
}

LossBreakdown CfCbmLoss(const ModelParams& params, const Batch& batch,
                        const LossWeights& weights, std::mt19937_64& rng, ModelParams* grads) {
  const bool cf = params.mode == ModelMode::kCfCbm;
  LossNoise noise;
  if (cf) {
    noise = DrawLossNoise(params.dims, batch.labels, rng);
  } else {
    noise.z = StandardNormal(params.dims.latent, batch.size(), rng);
  }
  return CfCbmLoss(params, batch, weights, noise, grads);
}

LossBreakdown CfCbmLoss(const ModelParams& params, const Batch& batch,
                        const LossWeights& w, const LossNoise& noise, ModelParams* grads) {
  CheckBatch(params, batch, noise);
  const Dims& d = params.dims;
  const auto n = batch.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  const bool cf = params.mode == ModelMode::kCfCbm;
  LossBreakdown out;

  // Factual branch: q(z|x), z, concepts, task.
  nn::GaussianNet::Cache enc_cache;
  const auto post = params.encoder.Forward(batch.features, &enc_cache);
  const Matrix z_scale = (0.5 * post.log_var.array()).exp().matrix();
  const Matrix z = post.mean + z_scale.cwiseProduct(noise.z);

  nn::Mlp::Cache dec_cache;
  const Matrix concept_logits = params.concept_decoder.Forward(z, &dec_cache);
  const Matrix concept_probs = nn::Sigmoid(concept_logits);
  out.concept_bce = BceWithLogits(concept_logits, batch.concepts);

  const Matrix class_probs = nn::SoftmaxColumns(params.task_head.Forward(concept_probs));
  out.task_ce = CrossEntropy(class_probs, batch.labels);

  KlGrads kl_z_grads;
  out.kl_z = BatchKl(post.mean, post.log_var, Matrix::Zero(d.latent, n),
                     Matrix::Zero(d.latent, n), w.kl_z, grads ? &kl_z_grads : nullptr);

  // Counterfactual branch.
  const Matrix y_onehot = OneHotColumns(batch.labels, d.classes);
  nn::GaussianNet::Cache cfp_cache, prior_cache;
  nn::GaussianNet::Output cf_post, prior;
  nn::Mlp::Cache cf_dec_cache;
  Matrix z_prime_scale, cf_concept_probs, cf_class_probs;
  KlGrads kl_zp_grads, post_dist_grads, prior_dist_grads;
  const bool grads_cf = grads != nullptr && cf && w.HasCounterfactualTerms();
  if (cf) {
    Matrix alpha(d.CfPosteriorInput(), n);
    alpha << z, batch.concepts, y_onehot, OneHotColumns(noise.y_prime, d.classes);
    cf_post = params.cf_posterior.Forward(alpha, &cfp_cache);
    z_prime_scale = (0.5 * cf_post.log_var.array()).exp().matrix();
    const Matrix z_prime = cf_post.mean + z_prime_scale.cwiseProduct(noise.z_prime);
    cf_concept_probs = nn::Sigmoid(params.concept_decoder.Forward(z_prime, &cf_dec_cache));
    cf_class_probs = nn::SoftmaxColumns(params.task_head.Forward(cf_concept_probs));
    out.validity_ce = CrossEntropy(cf_class_probs, noise.y_prime);

    Matrix beta(d.CfPriorInput(), n);
    beta << z, batch.concepts, y_onehot;
    prior = params.cf_prior.Forward(beta, &prior_cache);

    const Matrix zeros = Matrix::Zero(d.latent, n);
    out.kl_z_prime = BatchKl(cf_post.mean, cf_post.log_var, prior.mean, prior.log_var,
                             w.kl_z_prime, grads_cf ? &kl_zp_grads : nullptr);
    out.posterior_distance = BatchKl(post.mean, post.log_var, cf_post.mean, cf_post.log_var,
                                     w.posterior_distance, grads_cf ? &post_dist_grads : nullptr);
    out.prior_distance = BatchKl(zeros, zeros, prior.mean, prior.log_var, w.prior_distance,
                                 grads_cf ? &prior_dist_grads : nullptr);
  }
  out.total = WeightedTotal(out, w);

  if (!std::isfinite(out.total)) {
    throw TrainingDivergence("non-finite loss: " + out.ToString(), out);
  }
  if (grads == nullptr) return out;

  // Backward. Task head and concept decoder gradients accumulate from both
  // branches into the same storage.
  Matrix d_z = Matrix::Zero(d.latent, n);
  Matrix d_post_mean = kl_z_grads.mean_a;
  Matrix d_post_log_var = kl_z_grads.log_var_a;

  {
    Matrix d_class_logits = class_probs - y_onehot;
    d_class_logits *= w.task * inv_n;
    Matrix d_concept_probs = params.task_head.Backward(concept_probs, d_class_logits,
                                                       grads->task_head);
    Matrix d_concept_logits =
        (d_concept_probs.array() * concept_probs.array() * (1.0 - concept_probs.array()))
            .matrix();
    d_concept_logits += (w.concept_bce / static_cast<double>(concept_logits.size())) *
                        (concept_probs - batch.concepts);
    d_z += params.concept_decoder.Backward(dec_cache, d_concept_logits, grads->concept_decoder);
  }

  if (grads_cf) {
    Matrix d_cf_mean = kl_zp_grads.mean_a + post_dist_grads.mean_b;
    Matrix d_cf_log_var = kl_zp_grads.log_var_a + post_dist_grads.log_var_b;
    d_post_mean += post_dist_grads.mean_a;
    d_post_log_var += post_dist_grads.log_var_a;

    Matrix d_class_logits = cf_class_probs - OneHotColumns(noise.y_prime, d.classes);
    d_class_logits *= w.validity * inv_n;
    Matrix d_cf_concept_probs =
        params.task_head.Backward(cf_concept_probs, d_class_logits, grads->task_head);
    const Matrix d_cf_concept_logits =
        (d_cf_concept_probs.array() * cf_concept_probs.array() *
         (1.0 - cf_concept_probs.array()))
            .matrix();
    const Matrix d_z_prime = params.concept_decoder.Backward(cf_dec_cache, d_cf_concept_logits,
                                                             grads->concept_decoder);
    d_cf_mean += d_z_prime;
    d_cf_log_var +=
        (d_z_prime.array() * noise.z_prime.array() * 0.5 * z_prime_scale.array()).matrix();
    const Matrix d_alpha =
        params.cf_posterior.Backward(cfp_cache, d_cf_mean, d_cf_log_var, grads->cf_posterior);
    d_z += d_alpha.topRows(d.latent);

    const Matrix d_prior_mean = kl_zp_grads.mean_b + prior_dist_grads.mean_b;
    const Matrix d_prior_log_var = kl_zp_grads.log_var_b + prior_dist_grads.log_var_b;
    const Matrix d_beta =
        params.cf_prior.Backward(prior_cache, d_prior_mean, d_prior_log_var, grads->cf_prior);
    d_z += d_beta.topRows(d.latent);
  }

  d_post_mean += d_z;
  d_post_log_var += (d_z.array() * noise.z.array() * 0.5 * z_scale.array()).matrix();
  params.encoder.Backward(enc_cache, d_post_mean, d_post_log_var, grads->encoder);
  return out;
}

}  // namespace cfcbm
