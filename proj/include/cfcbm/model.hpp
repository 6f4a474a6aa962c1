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
#include <string>
#include <vector>

#include "cfcbm/gaussian.hpp"
#include "cfcbm/nn.hpp"

namespace cfcbm {

/// Feature width d, concept count r, class count l, latent size h.
struct Dims {
  Eigen::Index features = 0;
  Eigen::Index concepts = 0;
  Eigen::Index classes = 0;
  Eigen::Index latent = 0;

  bool operator==(const Dims&) const = default;

  Eigen::Index CfPosteriorInput() const { return latent + concepts + 2 * classes; }
  Eigen::Index CfPriorInput() const { return latent + concepts + classes; }
};

/// A plain CBM only trains the factual branch; counterfactual calls on it are
/// rejected.
enum class ModelMode { kCfCbm, kCbm };

std::string ModelModeName(ModelMode mode);
ModelMode ParseModelMode(const std::string& name);

struct ConceptProbs {
  Vector probs;
};

struct ClassProbs {
  Vector probs;
};

/// Every learnable network. The concept decoder and task head are single
/// members used by both the factual and counterfactual branches.
struct ModelParams {
  Dims dims;
  std::uint64_t seed = 0;
  ModelMode mode = ModelMode::kCfCbm;

  nn::GaussianNet encoder;          // q(z | x)
  nn::Mlp concept_decoder;          // z -> concept logits
  nn::Linear task_head;             // concepts -> class logits
  nn::GaussianNet cf_posterior;     // q(z' | z, c, y, y')
  nn::GaussianNet cf_prior;         // p(z' | z, c, y)

  /// Same shapes, all zeros. Used as a gradient accumulator.
  ModelParams ZerosLike() const;

  Eigen::Index ParameterCount() const;

  /// FNV-1a over the raw bytes of every tensor, for purity checks.
  std::uint64_t Checksum() const;
};

/// Visits every tensor in a fixed order; the order defines the checkpoint
/// layout and the optimizer state layout.
template <class Params, class Fn>
  requires std::same_as<std::remove_const_t<Params>, ModelParams>
void ForEachTensor(Params& p, Fn&& fn) {
  nn::ForEachTensor("encoder", p.encoder, fn);
  nn::ForEachTensor("concept_decoder", p.concept_decoder, fn);
  nn::ForEachTensor("task_head", p.task_head, fn);
  nn::ForEachTensor("cf_posterior", p.cf_posterior, fn);
  nn::ForEachTensor("cf_prior", p.cf_prior, fn);
}

/// Flat views over every tensor, in ForEachTensor order.
std::vector<Eigen::Map<Vector>> FlatViews(ModelParams& p);

ModelParams InitParams(const Dims& dims, std::uint64_t seed,
                       ModelMode mode = ModelMode::kCfCbm);

/// The posterior over z for a single feature vector.
GaussianDiag EncodePosterior(const ModelParams& params, const Vector& x);

/// q(z' | z, c, y, y'). `y` may be soft probabilities or one-hot; `y_prime`
/// must be one-hot.
GaussianDiag EncodeCfPosterior(const ModelParams& params, const LatentSample& z,
                               const Vector& concepts, const Vector& y,
                               const Vector& y_prime);

/// Learnable prior p(z' | z, c, y).
GaussianDiag CfPrior(const ModelParams& params, const LatentSample& z,
                     const Vector& concepts, const Vector& y);

ConceptProbs DecodeConcepts(const ModelParams& params, const Vector& z);

ClassProbs PredictTask(const ModelParams& params, const Vector& concept_probs);

Vector OneHot(Eigen::Index index, Eigen::Index size);

/// Lowest index wins ties.
Eigen::Index Argmax(const Vector& values);

}  // namespace cfcbm
