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

#include "cfcbm/engine.hpp"

#include "cfcbm/errors.hpp"

namespace cfcbm {

namespace {

void RequireCounterfactualModel(const ModelParams& model) {
  if (model.mode != ModelMode::kCfCbm) {
    throw Error(ErrorCode::kUnsupportedOperation,
                "counterfactual generation needs a model trained in cfcbm mode");
  }
}

void RequireTarget(const ModelParams& model, int target) {
  if (target < 0 || target >= model.dims.classes) {
    throw Error(ErrorCode::kInvalidInput, "target class " + std::to_string(target) +
                                              " out of range [0," +
                                              std::to_string(model.dims.classes) + ")");
  }
}

Counterfactual FromLatent(const ModelParams& model, const Prediction& pred, const Vector& z_prime,
                          int target) {
  Counterfactual cf;
  cf.target = target;
  cf.concept_probs = DecodeConcepts(model, z_prime).probs;
  cf.concepts = ThresholdConcepts(cf.concept_probs);
  cf.class_probs = PredictTask(model, cf.concepts).probs;
  cf.label = static_cast<int>(Argmax(cf.class_probs));
  cf.sparsity = HammingDistance(pred.concepts, cf.concepts);
  cf.valid = cf.label == target;
  return cf;
}

}  // namespace

std::string InferenceModeName(InferenceMode mode) {
  return mode == InferenceMode::kBestBet ? "best_bet" : "multiverse";
}

InferenceMode ParseInferenceMode(const std::string& name) {
  if (name == "best_bet" || name == "best-bet") return InferenceMode::kBestBet;
  if (name == "multiverse") return InferenceMode::kMultiverse;
  throw Error(ErrorCode::kInvalidInput, "unknown inference mode '" + name + "'");
}

Vector ThresholdConcepts(const Vector& probs, double threshold) {
  return (probs.array() >= threshold).cast<double>().matrix();
}

int HammingDistance(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw Error(ErrorCode::kInvalidInput, "Hamming length mismatch");
  return static_cast<int>((a.array() != b.array()).count());
}

Prediction Predict(const ModelParams& model, const Vector& x, InferenceMode mode,
                   std::mt19937_64& rng) {
  const GaussianDiag posterior = EncodePosterior(model, x);
  Prediction p;
  if (mode == InferenceMode::kBestBet) {
    p.z = {posterior.mean, LatentSource::kPosteriorZ};
    p.concept_probs = DecodeConcepts(model, p.z.values).probs;
    p.concepts = ThresholdConcepts(p.concept_probs);
  } else {
    p.z = SampleGaussian(posterior, StandardNormal(model.dims.latent, rng));
    p.concept_probs = DecodeConcepts(model, p.z.values).probs;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    p.concepts.resize(p.concept_probs.size());
    for (Eigen::Index i = 0; i < p.concepts.size(); ++i) {
      p.concepts[i] = u(rng) < p.concept_probs[i] ? 1.0 : 0.0;
    }
  }
  p.class_probs = PredictTask(model, p.concepts).probs;
  p.label = static_cast<int>(Argmax(p.class_probs));
  return p;
}

InterventionResult Intervene(const ModelParams& model, const Prediction& pred,
                             const InterventionSet& iv) {
  InterventionResult out;
  out.concepts = pred.concepts;
  std::vector<bool> seen(static_cast<std::size_t>(model.dims.concepts), false);
  for (const auto& [index, value] : iv.entries) {
    if (index < 0 || index >= model.dims.concepts) {
      throw Error(ErrorCode::kInvalidInput, "intervention index " + std::to_string(index) +
                                                " out of range [0," +
                                                std::to_string(model.dims.concepts) + ")");
    }
    if (value != 0.0 && value != 1.0) {
      throw Error(ErrorCode::kInvalidInput, "intervened concept values must be 0 or 1");
    }
    if (seen[static_cast<std::size_t>(index)]) {
      throw Error(ErrorCode::kInvalidInput, "duplicate intervention index");
    }
    seen[static_cast<std::size_t>(index)] = true;
    out.concepts[index] = value;
  }
  out.class_probs = PredictTask(model, out.concepts).probs;
  out.label = static_cast<int>(Argmax(out.class_probs));
  return out;
}

std::vector<Counterfactual> Imagine(const ModelParams& model, const Prediction& pred,
                                    int target, InferenceMode mode, int n_samples,
                                    std::mt19937_64& rng) {
  RequireCounterfactualModel(model);
  RequireTarget(model, target);
  if (n_samples < 1) throw Error(ErrorCode::kInvalidInput, "n_samples must be >= 1");
  const GaussianDiag posterior =
      EncodeCfPosterior(model, pred.z, pred.concepts, pred.class_probs,
                        OneHot(target, model.dims.classes));
  std::vector<Counterfactual> out;
  if (mode == InferenceMode::kBestBet) {
    out.push_back(FromLatent(model, pred, posterior.mean, target));
    return out;
  }
  out.reserve(static_cast<std::size_t>(n_samples));
  for (int s = 0; s < n_samples; ++s) {
    const LatentSample z_prime = SampleGaussian(
        posterior, StandardNormal(model.dims.latent, rng), LatentSource::kPosteriorZPrime);
    out.push_back(FromLatent(model, pred, z_prime.values, target));
  }
  return out;
}

std::vector<Counterfactual> ImagineFromPrior(const ModelParams& model, const Prediction& pred,
                                             int n_samples, std::mt19937_64& rng) {
  RequireCounterfactualModel(model);
  if (n_samples < 1) throw Error(ErrorCode::kInvalidInput, "n_samples must be >= 1");
  const GaussianDiag prior = CfPrior(model, pred.z, pred.concepts, pred.class_probs);
  std::vector<Counterfactual> out;
  for (int s = 0; s < n_samples; ++s) {
    const LatentSample z_prime = SampleGaussian(prior, StandardNormal(model.dims.latent, rng),
                                                LatentSource::kPriorZPrime);
    Counterfactual cf = FromLatent(model, pred, z_prime.values, 0);
    cf.target = cf.label;
    cf.valid = true;
    out.push_back(std::move(cf));
  }
  return out;
}

Counterfactual TaskDrivenIntervention(const ModelParams& model, const Prediction& pred,
                                      int corrected_class, InferenceMode mode,
                                      std::mt19937_64& rng) {
  return Imagine(model, pred, corrected_class, mode, 1, rng).front();
}

Counterfactual TaskDrivenIntervention(const ModelParams& model, const Vector& x,
                                      int corrected_class, InferenceMode mode,
                                      std::mt19937_64& rng) {
  RequireCounterfactualModel(model);
  RequireTarget(model, corrected_class);
  const Prediction pred = Predict(model, x, mode, rng);
  return TaskDrivenIntervention(model, pred, corrected_class, mode, rng);
}

std::vector<Prediction> PredictBatch(const ModelParams& model, const Matrix& features) {
  if (features.rows() != model.dims.features) {
    throw Error(ErrorCode::kInvalidInput, "feature batch width mismatch");
  }
  const auto posterior = model.encoder.Forward(features);
  const Matrix concept_probs = nn::Sigmoid(model.concept_decoder.Forward(posterior.mean));
  const Matrix concepts = (concept_probs.array() >= kConceptThreshold).cast<double>().matrix();
  const Matrix class_probs = nn::SoftmaxColumns(model.task_head.Forward(concepts));
  std::vector<Prediction> out(static_cast<std::size_t>(features.cols()));
  for (Eigen::Index j = 0; j < features.cols(); ++j) {
    auto& p = out[static_cast<std::size_t>(j)];
    p.z = {posterior.mean.col(j), LatentSource::kPosteriorZ};
    p.concept_probs = concept_probs.col(j);
    p.concepts = concepts.col(j);
    p.class_probs = class_probs.col(j);
    p.label = static_cast<int>(Argmax(p.class_probs));
  }
  return out;
}

}  // namespace cfcbm
