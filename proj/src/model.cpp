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

#include "cfcbm/model.hpp"

#include <cstring>

#include "cfcbm/errors.hpp"

namespace cfcbm {

namespace {

void RequireLength(const Vector& v, Eigen::Index expected, const char* what) {
  if (v.size() != expected) {
    throw Error(ErrorCode::kInvalidInput, std::string(what) + " has length " +
                                              std::to_string(v.size()) + ", expected " +
                                              std::to_string(expected));
  }
  if (!v.allFinite()) {
    throw Error(ErrorCode::kInvalidInput, std::string(what) + " contains non-finite values");
  }
}

void RequireOneHot(const Vector& v, const char* what) {
  int ones = 0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (v[i] == 1.0) {
      ++ones;
    } else if (v[i] != 0.0) {
      ones = -1;
      break;
    }
  }
  if (ones != 1) throw Error(ErrorCode::kInvalidInput, std::string(what) + " must be one-hot");
}

GaussianDiag ToGaussian(const nn::GaussianNet::Output& out) {
  GaussianDiag g{out.mean.col(0), out.log_var.col(0)};
#ifndef NDEBUG
  ValidateGaussian(g);
#endif
  return g;
}

}  // namespace

std::string ModelModeName(ModelMode mode) { return mode == ModelMode::kCfCbm ? "cfcbm" : "cbm"; }

ModelMode ParseModelMode(const std::string& name) {
  if (name == "cfcbm") return ModelMode::kCfCbm;
  if (name == "cbm") return ModelMode::kCbm;
  throw Error(ErrorCode::kConfigError, "unknown mode '" + name + "' (expected cfcbm|cbm)");
}

ModelParams ModelParams::ZerosLike() const {
  ModelParams out = *this;
  ForEachTensor(out, [](const std::string&, auto& t) { t.setZero(); });
  return out;
}

Eigen::Index ModelParams::ParameterCount() const {
  Eigen::Index total = 0;
  ForEachTensor(*this, [&](const std::string&, const auto& t) { total += t.size(); });
  return total;
}

std::uint64_t ModelParams::Checksum() const {
  std::uint64_t hash = 1469598103934665603ULL;
  ForEachTensor(*this, [&](const std::string&, const auto& t) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(t.data());
    for (std::size_t i = 0; i < static_cast<std::size_t>(t.size()) * sizeof(double); ++i) {
      hash ^= bytes[i];
      hash *= 1099511628211ULL;
    }
  });
  return hash;
}

std::vector<Eigen::Map<Vector>> FlatViews(ModelParams& p) {
  std::vector<Eigen::Map<Vector>> views;
  ForEachTensor(p, [&](const std::string&, auto& t) { views.emplace_back(t.data(), t.size()); });
  return views;
}

ModelParams InitParams(const Dims& dims, std::uint64_t seed, ModelMode mode) {
  if (dims.features < 1 || dims.concepts < 1 || dims.classes < 1 || dims.latent < 1) {
    throw Error(ErrorCode::kInvalidDimension, "all model dimensions must be >= 1");
  }
  ModelParams p;
  p.dims = dims;
  p.seed = seed;
  p.mode = mode;
  const auto h = dims.latent;
  p.encoder = nn::GaussianNet(dims.features, h, h);
  p.concept_decoder = nn::Mlp(h, h, dims.concepts);
  p.task_head = nn::Linear(dims.concepts, dims.classes);
  p.cf_posterior = nn::GaussianNet(dims.CfPosteriorInput(), h, h);
  p.cf_prior = nn::GaussianNet(dims.CfPriorInput(), h, h);

  std::mt19937_64 rng(seed);
  auto init = [&](nn::Linear& layer) { layer.InitUniform(rng); };
  for (nn::GaussianNet* net : {&p.encoder, &p.cf_posterior, &p.cf_prior}) {
    init(net->trunk);
    init(net->mean_head);
    init(net->log_var_head);
  }
  init(p.concept_decoder.hidden);
  init(p.concept_decoder.output);
  init(p.task_head);
  return p;
}

GaussianDiag EncodePosterior(const ModelParams& params, const Vector& x) {
  RequireLength(x, params.dims.features, "feature vector");
  return ToGaussian(params.encoder.Forward(x));
}

GaussianDiag EncodeCfPosterior(const ModelParams& params, const LatentSample& z,
                               const Vector& concepts, const Vector& y,
                               const Vector& y_prime) {
  const Dims& d = params.dims;
  RequireLength(z.values, d.latent, "latent z");
  RequireLength(concepts, d.concepts, "concept vector");
  RequireLength(y, d.classes, "class vector y");
  RequireLength(y_prime, d.classes, "target y'");
  RequireOneHot(y_prime, "target y'");
  Vector alpha(d.CfPosteriorInput());
  alpha << z.values, concepts, y, y_prime;
  return ToGaussian(params.cf_posterior.Forward(alpha));
}

GaussianDiag CfPrior(const ModelParams& params, const LatentSample& z, const Vector& concepts,
                     const Vector& y) {
  const Dims& d = params.dims;
  RequireLength(z.values, d.latent, "latent z");
  RequireLength(concepts, d.concepts, "concept vector");
  RequireLength(y, d.classes, "class vector y");
  Vector beta(d.CfPriorInput());
  beta << z.values, concepts, y;
  return ToGaussian(params.cf_prior.Forward(beta));
}

ConceptProbs DecodeConcepts(const ModelParams& params, const Vector& z) {
  RequireLength(z, params.dims.latent, "latent z");
  return {nn::Sigmoid(params.concept_decoder.Forward(z)).col(0)};
}

ClassProbs PredictTask(const ModelParams& params, const Vector& concept_probs) {
  RequireLength(concept_probs, params.dims.concepts, "concept probabilities");
  return {nn::SoftmaxColumns(params.task_head.Forward(concept_probs)).col(0)};
}

Vector OneHot(Eigen::Index index, Eigen::Index size) {
  if (index < 0 || index >= size) {
    throw Error(ErrorCode::kInvalidInput, "class index " + std::to_string(index) +
                                              " out of range [0," + std::to_string(size) + ")");
  }
  Vector v = Vector::Zero(size);
  v[index] = 1.0;
  return v;
}

Eigen::Index Argmax(const Vector& values) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

}  // namespace cfcbm
