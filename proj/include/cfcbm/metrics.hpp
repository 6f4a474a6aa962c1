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

#include <random>
#include <span>
#include <vector>

#include "cfcbm/dataset.hpp"
#include "cfcbm/engine.hpp"

namespace cfcbm::metrics {

/// Rank-based ROC AUC with midranks for ties. Throws kUndefinedMetric when
/// only one class is present.
double RocAuc(std::span<const double> scores, std::span<const int> labels);

/// Macro one-vs-rest AUC over the columns of `class_probs` (n x l). Classes
/// without both positives and negatives are skipped.
double MacroTaskAuc(const Matrix& class_probs, std::span<const int> labels);

/// Macro AUC over concepts; `concept_probs` and `concepts` are n x r.
double MacroConceptAuc(const Matrix& concept_probs, const Matrix& concepts);

struct Generalization {
  double task_auc = 0.0;
  double concept_auc = 0.0;
  double task_accuracy = 0.0;
  double concept_accuracy = 0.0;
};

/// Best-bet evaluation. AUCs score soft probabilities: the task head is
/// applied to the concept probabilities; accuracies use thresholded concepts
/// and the Prediction label.
Generalization EvaluateGeneralization(const ModelParams& model, const Dataset& ds);

/// Percentage of valid counterfactuals.
double Validity(std::span<const Counterfactual> cfs);

/// Mean over counterfactuals of the minimum Hamming distance to any training
/// concept vector (n x r).
double Proximity(std::span<const Counterfactual> cfs, const Matrix& train_concepts);

/// Minimum Hamming distance from `c` to a training concept vector of class
/// `target`, by exhaustive scan.
int OptimalSparsityOracle(const Vector& c, int target, const Dataset& train);

/// |mean oracle sparsity - mean observed sparsity| over aligned pairs.
double DeltaSparsity(std::span<const Prediction> preds, std::span<const Counterfactual> cfs,
                     const Dataset& train);

/// Mean over counterfactuals of the best Jaccard index against training
/// vectors of the counterfactual's target class. Two empty vectors score 1.
double IouPlausibility(std::span<const Counterfactual> cfs, const Dataset& train);

double Jaccard(const Vector& a, const Vector& b);

/// Unique generated vectors over unique training vectors.
double Variability(std::span<const Counterfactual> cfs, const Matrix& train_concepts);

struct InterventionAccuracy {
  double acc_int = 0.0;           // concept accuracy of the proposed fix
  double noisy_accuracy = 0.0;    // concept accuracy after noise injection
  double clean_accuracy = 0.0;    // concept accuracy before noise
};

/// Flips each predicted concept with probability `noise_p`, then asks for a
/// task-driven intervention toward the true label and scores the proposed
/// concepts against ground truth.
InterventionAccuracy EvaluateInterventionAccuracy(const ModelParams& model, const Dataset& test,
                                                  double noise_p, std::mt19937_64& rng);

struct CaCE {
  std::vector<double> per_class;
  double summary = 0.0;  // max over classes
};

/// Causal concept effect of forcing concept `index` to 1 versus 0 on the
/// best-bet predicted concept vectors of `ds`.
CaCE CausalConceptEffect(const ModelParams& model, const Dataset& ds, Eigen::Index index);

}  // namespace cfcbm::metrics
