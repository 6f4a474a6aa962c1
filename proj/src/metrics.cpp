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

#include "cfcbm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <string>

#include "cfcbm/errors.hpp"

namespace cfcbm::metrics {

namespace {

std::string Key(const Vector& v) {
  std::string key(static_cast<std::size_t>(v.size()), '0');
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (v[i] != 0.0) key[static_cast<std::size_t>(i)] = '1';
  }
  return key;
}

std::set<std::string> UniqueRows(const Matrix& m) {
  std::set<std::string> out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.insert(Key(m.row(i).transpose()));
  return out;
}

void RequireNonEmpty(std::size_t n, const char* what) {
  if (n == 0) throw Error(ErrorCode::kUndefinedMetric, std::string(what) + " of an empty set");
}

bool HasClass(const Dataset& train, int target) {
  return std::find(train.labels.begin(), train.labels.end(), target) != train.labels.end();
}

}  // namespace

double RocAuc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw Error(ErrorCode::kInvalidInput, "scores and labels differ in length");
  }
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double positive_rank_sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) {
      if (labels[order[k]] != 0) {
        positive_rank_sum += midrank;
        ++positives;
      }
    }
    i = j + 1;
  }
  const std::size_t negatives = n - positives;
  if (positives == 0 || negatives == 0) {
    throw Error(ErrorCode::kUndefinedMetric, "ROC AUC needs both classes");
  }
  const double p = static_cast<double>(positives);
  return (positive_rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(negatives));
}

double MacroTaskAuc(const Matrix& class_probs, std::span<const int> labels) {
  double total = 0.0;
  int counted = 0;
  std::vector<double> scores(static_cast<std::size_t>(class_probs.rows()));
  std::vector<int> binary(labels.size());
  for (Eigen::Index k = 0; k < class_probs.cols(); ++k) {
    int pos = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      binary[i] = labels[i] == k ? 1 : 0;
      pos += binary[i];
      scores[i] = class_probs(static_cast<Eigen::Index>(i), k);
    }
    if (pos == 0 || pos == static_cast<int>(labels.size())) continue;
    total += RocAuc(scores, binary);
    ++counted;
  }
  if (counted == 0) throw Error(ErrorCode::kUndefinedMetric, "no class has both outcomes");
  return total / counted;
}

double MacroConceptAuc(const Matrix& concept_probs, const Matrix& concepts) {
  double total = 0.0;
  int counted = 0;
  std::vector<double> scores(static_cast<std::size_t>(concepts.rows()));
  std::vector<int> labels(static_cast<std::size_t>(concepts.rows()));
  for (Eigen::Index k = 0; k < concepts.cols(); ++k) {
    int pos = 0;
    for (Eigen::Index i = 0; i < concepts.rows(); ++i) {
      scores[static_cast<std::size_t>(i)] = concept_probs(i, k);
      labels[static_cast<std::size_t>(i)] = concepts(i, k) != 0.0 ? 1 : 0;
      pos += labels[static_cast<std::size_t>(i)];
    }
    if (pos == 0 || pos == concepts.rows()) continue;
    total += RocAuc(scores, labels);
    ++counted;
  }
  if (counted == 0) throw Error(ErrorCode::kUndefinedMetric, "no concept has both outcomes");
  return total / counted;
}

Generalization EvaluateGeneralization(const ModelParams& model, const Dataset& ds) {
  const auto posterior = model.encoder.Forward(ds.features.transpose());
  const Matrix concept_probs = nn::Sigmoid(model.concept_decoder.Forward(posterior.mean));
  const Matrix soft_class = nn::SoftmaxColumns(model.task_head.Forward(concept_probs));
  const Matrix concepts = (concept_probs.array() >= kConceptThreshold).cast<double>().matrix();
  const Matrix hard_class = nn::SoftmaxColumns(model.task_head.Forward(concepts));

  Generalization g;
  g.task_auc = MacroTaskAuc(soft_class.transpose(), ds.labels);
  g.concept_auc = MacroConceptAuc(concept_probs.transpose(), ds.concepts);
  int correct = 0;
  for (Eigen::Index j = 0; j < hard_class.cols(); ++j) {
    correct += Argmax(hard_class.col(j)) == ds.labels[static_cast<std::size_t>(j)] ? 1 : 0;
  }
  g.task_accuracy = static_cast<double>(correct) / static_cast<double>(ds.size());
  g.concept_accuracy =
      (concepts.transpose().array() == ds.concepts.array()).cast<double>().mean();
  return g;
}

double Validity(std::span<const Counterfactual> cfs) {
  RequireNonEmpty(cfs.size(), "validity");
  const auto valid = std::count_if(cfs.begin(), cfs.end(), [](const auto& c) { return c.valid; });
  return 100.0 * static_cast<double>(valid) / static_cast<double>(cfs.size());
}

double Proximity(std::span<const Counterfactual> cfs, const Matrix& train_concepts) {
  RequireNonEmpty(cfs.size(), "proximity");
  RequireNonEmpty(static_cast<std::size_t>(train_concepts.rows()), "proximity reference");
  const Matrix unique = [&] {
    const auto keys = UniqueRows(train_concepts);
    Matrix m(static_cast<Eigen::Index>(keys.size()), train_concepts.cols());
    Eigen::Index i = 0;
    for (const auto& k : keys) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = k[static_cast<std::size_t>(j)] == '1';
      ++i;
    }
    return m;
  }();
  double total = 0.0;
  for (const auto& cf : cfs) {
    if (cf.concepts.size() != unique.cols()) {
      throw Error(ErrorCode::kInvalidInput, "counterfactual width differs from training data");
    }
    Eigen::Index best = std::numeric_limits<Eigen::Index>::max();
    for (Eigen::Index i = 0; i < unique.rows(); ++i) {
      best = std::min(best, (unique.row(i).transpose().array() != cf.concepts.array()).count());
    }
    total += static_cast<double>(best);
  }
  return total / static_cast<double>(cfs.size());
}

int OptimalSparsityOracle(const Vector& c, int target, const Dataset& train) {
  if (c.size() != train.concepts.cols()) {
    throw Error(ErrorCode::kInvalidInput, "concept width differs from training data");
  }
  int best = std::numeric_limits<int>::max();
  for (Eigen::Index i = 0; i < train.size(); ++i) {
    if (train.labels[static_cast<std::size_t>(i)] != target) continue;
    best = std::min(best, HammingDistance(c, train.concepts.row(i).transpose()));
    if (best == 0) break;
  }
  if (best == std::numeric_limits<int>::max()) {
    throw Error(ErrorCode::kNotFound,
                "class " + std::to_string(target) + " absent from training set");
  }
  return best;
}

double DeltaSparsity(std::span<const Prediction> preds, std::span<const Counterfactual> cfs,
                     const Dataset& train) {
  if (preds.size() != cfs.size()) {
    throw Error(ErrorCode::kInvalidInput, "predictions and counterfactuals are not aligned");
  }
  RequireNonEmpty(cfs.size(), "delta sparsity");
  double oracle = 0.0, observed = 0.0;
  for (std::size_t i = 0; i < cfs.size(); ++i) {
    oracle += OptimalSparsityOracle(preds[i].concepts, cfs[i].target, train);
    observed += HammingDistance(preds[i].concepts, cfs[i].concepts);
  }
  const double n = static_cast<double>(cfs.size());
  return std::abs(oracle / n - observed / n);
}

double Jaccard(const Vector& a, const Vector& b) {
  const auto inter = ((a.array() != 0.0) && (b.array() != 0.0)).count();
  const auto uni = ((a.array() != 0.0) || (b.array() != 0.0)).count();
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double IouPlausibility(std::span<const Counterfactual> cfs, const Dataset& train) {
  RequireNonEmpty(cfs.size(), "IoU");
  double total = 0.0;
  for (const auto& cf : cfs) {
    if (!HasClass(train, cf.target)) {
      throw Error(ErrorCode::kNotFound,
                  "class " + std::to_string(cf.target) + " absent from training set");
    }
    double best = 0.0;
    for (Eigen::Index i = 0; i < train.size() && best < 1.0; ++i) {
      if (train.labels[static_cast<std::size_t>(i)] != cf.target) continue;
      best = std::max(best, Jaccard(cf.concepts, train.concepts.row(i).transpose()));
    }
    total += best;
  }
  return total / static_cast<double>(cfs.size());
}

double Variability(std::span<const Counterfactual> cfs, const Matrix& train_concepts) {
  RequireNonEmpty(cfs.size(), "variability");
  std::set<std::string> generated;
  for (const auto& cf : cfs) generated.insert(Key(cf.concepts));
  const auto reference = UniqueRows(train_concepts);
  RequireNonEmpty(reference.size(), "variability reference");
  return static_cast<double>(generated.size()) / static_cast<double>(reference.size());
}

InterventionAccuracy EvaluateInterventionAccuracy(const ModelParams& model, const Dataset& test,
                                                  double noise_p, std::mt19937_64& rng) {
  if (!(noise_p >= 0.0 && noise_p <= 1.0)) {
    throw Error(ErrorCode::kInvalidInput, "noise probability must lie in [0,1]");
  }
  RequireNonEmpty(static_cast<std::size_t>(test.size()), "intervention accuracy");
  std::bernoulli_distribution flip(noise_p);
  const auto preds = PredictBatch(model, test.features.transpose());
  const double r = static_cast<double>(model.dims.concepts);
  InterventionAccuracy acc;
  for (Eigen::Index i = 0; i < test.size(); ++i) {
    const Vector truth = test.concepts.row(i).transpose();
    Prediction noisy = preds[static_cast<std::size_t>(i)];
    acc.clean_accuracy += (noisy.concepts.array() == truth.array()).count() / r;
    for (Eigen::Index k = 0; k < noisy.concepts.size(); ++k) {
      if (flip(rng)) noisy.concepts[k] = 1.0 - noisy.concepts[k];
    }
    noisy.class_probs = PredictTask(model, noisy.concepts).probs;
    noisy.label = static_cast<int>(Argmax(noisy.class_probs));
    acc.noisy_accuracy += (noisy.concepts.array() == truth.array()).count() / r;
    const Counterfactual fix = TaskDrivenIntervention(
        model, noisy, test.labels[static_cast<std::size_t>(i)], InferenceMode::kBestBet, rng);
    acc.acc_int += (fix.concepts.array() == truth.array()).count() / r;
  }
  const double n = static_cast<double>(test.size());
  acc.acc_int /= n;
  acc.noisy_accuracy /= n;
  acc.clean_accuracy /= n;
  return acc;
}

CaCE CausalConceptEffect(const ModelParams& model, const Dataset& ds, Eigen::Index index) {
  if (index < 0 || index >= model.dims.concepts) {
    throw Error(ErrorCode::kInvalidInput, "concept index " + std::to_string(index) +
                                              " out of range");
  }
  RequireNonEmpty(static_cast<std::size_t>(ds.size()), "CaCE");
  const auto preds = PredictBatch(model, ds.features.transpose());
  Matrix on(model.dims.concepts, ds.size());
  for (std::size_t j = 0; j < preds.size(); ++j) on.col(static_cast<Eigen::Index>(j)) = preds[j].concepts;
  Matrix off = on;
  on.row(index).setOnes();
  off.row(index).setZero();
  const Matrix delta = nn::SoftmaxColumns(model.task_head.Forward(on)) -
                       nn::SoftmaxColumns(model.task_head.Forward(off));
  CaCE out;
  const Vector mean_delta = delta.rowwise().mean();
  for (Eigen::Index k = 0; k < mean_delta.size(); ++k) {
    out.per_class.push_back(std::abs(mean_delta[k]));
  }
  out.summary = *std::max_element(out.per_class.begin(), out.per_class.end());
  return out;
}

}  // namespace cfcbm::metrics
