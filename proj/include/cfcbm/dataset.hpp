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
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cfcbm/gaussian.hpp"
#include "cfcbm/loss.hpp"

namespace cfcbm {

struct DatasetMeta {
  std::string name;
  Eigen::Index features = 0;
  Eigen::Index concepts = 0;
  Eigen::Index classes = 0;
  std::vector<std::string> concept_names;
  std::vector<std::string> class_names;
};

/// Row-per-sample dataset of (features, binary concepts, label).
struct Dataset {
  Matrix features;          // n x d
  Matrix concepts;          // n x r, entries exactly 0 or 1
  std::vector<int> labels;  // n
  DatasetMeta meta;

  Eigen::Index size() const { return features.rows(); }

  /// Throws kValidationError on any broken invariant.
  void Validate() const;

  Dataset Subset(std::span<const Eigen::Index> rows) const;

  /// Gathers the given rows into a column-major batch.
  Batch MakeBatch(std::span<const Eigen::Index> rows) const;
  Batch AllAsBatch() const;
};

struct DspritesOptions {
  std::optional<double> confound_rate;  // in [0.5, 1] when set
  double positive_fraction = 0.5;
  Eigen::Index feature_dim = 64;
  double noise_std = 0.05;
  std::uint64_t embedding_seed = 0x5eed'e3b3;
};

/// Seven concepts (square, ellipse, heart, two_objects, red, green, blue);
/// label is 1 iff a square or a heart is present. Features are a fixed noisy
/// linear embedding of the concept vector.
Dataset GenDspritesLike(Eigen::Index n, std::uint64_t seed, const DspritesOptions& options = {});

/// True iff the 7-concept vector satisfies the shape/color/count constraints.
bool DspritesConstraintsHold(std::span<const double> concepts);

struct MnistAddOptions {
  Eigen::Index feature_dim = 64;
  double noise_std = 0.05;
  std::uint64_t embedding_seed = 0x5eed'add0;
};

/// Concepts are onehot(d1) ++ onehot(d2); label is d1 + d2.
Dataset GenMnistAdd(Eigen::Index n, std::uint64_t seed, const MnistAddOptions& options = {});

/// Sibling metadata path for a CSV file: `data.csv` -> `data.json`.
std::filesystem::path MetadataPath(const std::filesystem::path& csv_path);

void SaveDataset(const Dataset& ds, const std::filesystem::path& csv_path);

/// Reads the CSV and its metadata. Malformed rows raise kParseError with the
/// line number; non-binary concepts or out-of-range labels raise
/// kValidationError.
Dataset LoadDataset(const std::filesystem::path& csv_path);

struct SplitSpec {
  double train = 0.7;
  double val = 0.1;
  double test = 0.2;
  std::uint64_t seed = 0;
};

struct Splits {
  Dataset train;
  Dataset val;
  Dataset test;
};

/// Seeded permutation partition, stratified by label when every class has at
/// least three samples.
Splits Split(const Dataset& ds, const SplitSpec& spec);

}  // namespace cfcbm
