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

#include "cfcbm/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "cfcbm/errors.hpp"

namespace cfcbm {

namespace {

constexpr int kSquare = 0, kEllipse = 1, kHeart = 2, kTwoObjects = 3;
constexpr int kRed = 4, kGreen = 5, kBlue = 6;

Matrix Embedding(Eigen::Index d, Eigen::Index r, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return StandardNormal(d, r, rng);
}

void EmbedFeatures(Dataset& ds, std::uint64_t embedding_seed, double noise_std,
                   std::mt19937_64& rng) {
  const Matrix w = Embedding(ds.meta.features, ds.meta.concepts, embedding_seed);
  ds.features = ds.concepts * w.transpose();
  std::normal_distribution<double> noise(0.0, noise_std);
  for (Eigen::Index i = 0; i < ds.features.rows(); ++i) {
    for (Eigen::Index j = 0; j < ds.features.cols(); ++j) ds.features(i, j) += noise(rng);
  }
}

std::string FormatDouble(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

void Dataset::Validate() const {
  const auto n = features.rows();
  if (concepts.rows() != n || static_cast<Eigen::Index>(labels.size()) != n) {
    throw Error(ErrorCode::kValidationError, "dataset row counts differ");
  }
  if (features.cols() != meta.features || concepts.cols() != meta.concepts) {
    throw Error(ErrorCode::kValidationError, "dataset widths disagree with metadata");
  }
  if (meta.classes < 1) throw Error(ErrorCode::kValidationError, "dataset needs >= 1 class");
  if (!features.allFinite()) throw Error(ErrorCode::kValidationError, "non-finite feature");
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < concepts.cols(); ++j) {
      const double v = concepts(i, j);
      if (v != 0.0 && v != 1.0) {
        throw Error(ErrorCode::kValidationError,
                    "concept value " + FormatDouble(v) + " at row " + std::to_string(i) +
                        " is not binary");
      }
    }
    if (labels[i] < 0 || labels[i] >= meta.classes) {
      throw Error(ErrorCode::kValidationError,
                  "label " + std::to_string(labels[i]) + " at row " + std::to_string(i) +
                      " out of range");
    }
  }
}

Dataset Dataset::Subset(std::span<const Eigen::Index> rows) const {
  Dataset out;
  out.meta = meta;
  const auto n = static_cast<Eigen::Index>(rows.size());
  out.features.resize(n, features.cols());
  out.concepts.resize(n, concepts.cols());
  out.labels.resize(rows.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    out.features.row(i) = features.row(rows[i]);
    out.concepts.row(i) = concepts.row(rows[i]);
    out.labels[i] = labels[rows[i]];
  }
  return out;
}

Batch Dataset::MakeBatch(std::span<const Eigen::Index> rows) const {
  Batch b;
  const auto n = static_cast<Eigen::Index>(rows.size());
  b.features.resize(features.cols(), n);
  b.concepts.resize(concepts.cols(), n);
  b.labels.resize(rows.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    b.features.col(i) = features.row(rows[i]).transpose();
    b.concepts.col(i) = concepts.row(rows[i]).transpose();
    b.labels[i] = labels[rows[i]];
  }
  return b;
}

Batch Dataset::AllAsBatch() const {
  return {features.transpose(), concepts.transpose(), labels};
}

bool DspritesConstraintsHold(std::span<const double> c) {
  if (c.size() != 7) return false;
  const int shapes = static_cast<int>(c[kSquare] + c[kEllipse] + c[kHeart]);
  const int colors = static_cast<int>(c[kRed] + c[kGreen] + c[kBlue]);
  if (shapes < 1 || colors != 1) return false;
  if (c[kTwoObjects] == 1.0 && shapes < 2) return false;
  return true;
}

Dataset GenDspritesLike(Eigen::Index n, std::uint64_t seed, const DspritesOptions& options) {
  if (n < 1) throw Error(ErrorCode::kInvalidInput, "dataset size must be >= 1");
  if (options.confound_rate &&
      (!(*options.confound_rate >= 0.5) || !(*options.confound_rate <= 1.0))) {
    throw Error(ErrorCode::kInvalidInput, "confound_rate must lie in [0.5, 1]");
  }
  if (!(options.positive_fraction > 0.0 && options.positive_fraction < 1.0)) {
    throw Error(ErrorCode::kInvalidInput, "positive_fraction must lie in (0, 1)");
  }
  Dataset ds;
  ds.meta = {.name = options.confound_rate ? "dsprites_confounded" : "dsprites",
             .features = options.feature_dim,
             .concepts = 7,
             .classes = 2,
             .concept_names = {"square", "ellipse", "heart", "two_objects", "red", "green",
                               "blue"},
             .class_names = {"no_square_or_heart", "square_or_heart"}};
  ds.concepts = Matrix::Zero(n, 7);
  ds.labels.resize(static_cast<std::size_t>(n));

  std::mt19937_64 rng(seed);
  std::bernoulli_distribution positive(options.positive_fraction);
  std::uniform_int_distribution<int> bits(0, 15);
  std::uniform_int_distribution<int> any_color(kRed, kBlue);
  std::bernoulli_distribution coin(0.5);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int y = positive(rng) ? 1 : 0;
    int color;
    if (options.confound_rate) {
      std::bernoulli_distribution follow(*options.confound_rate);
      const bool typical = follow(rng);
      if (y == 1) {
        color = typical ? kGreen : (coin(rng) ? kRed : kBlue);
      } else {
        color = typical ? (coin(rng) ? kRed : kBlue) : kGreen;
      }
    } else {
      color = any_color(rng);
    }
    // Rejection sampling of the shape and object-count bits given the label.
    std::array<double, 7> c{};
    while (true) {
      const int b = bits(rng);
      c = {};
      for (int k = 0; k < 4; ++k) c[k] = (b >> k) & 1;
      c[color] = 1.0;
      const int label = (c[kSquare] == 1.0 || c[kHeart] == 1.0) ? 1 : 0;
      if (label == y && DspritesConstraintsHold(c)) break;
    }
    for (int k = 0; k < 7; ++k) ds.concepts(i, k) = c[k];
    ds.labels[i] = y;
  }
  EmbedFeatures(ds, options.embedding_seed, options.noise_std, rng);
  return ds;
}

Dataset GenMnistAdd(Eigen::Index n, std::uint64_t seed, const MnistAddOptions& options) {
  if (n < 1) throw Error(ErrorCode::kInvalidInput, "dataset size must be >= 1");
  Dataset ds;
  ds.meta.name = "mnist_add";
  ds.meta.features = options.feature_dim;
  ds.meta.concepts = 20;
  ds.meta.classes = 19;
  for (int half = 0; half < 2; ++half) {
    for (int digit = 0; digit < 10; ++digit) {
      ds.meta.concept_names.push_back((half == 0 ? "first_" : "second_") +
                                      std::to_string(digit));
    }
  }
  for (int s = 0; s < 19; ++s) ds.meta.class_names.push_back("sum_" + std::to_string(s));
  ds.concepts = Matrix::Zero(n, 20);
  ds.labels.resize(static_cast<std::size_t>(n));

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> digit(0, 9);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int d1 = digit(rng);
    const int d2 = digit(rng);
    ds.concepts(i, d1) = 1.0;
    ds.concepts(i, 10 + d2) = 1.0;
    ds.labels[i] = d1 + d2;
  }
  EmbedFeatures(ds, options.embedding_seed, options.noise_std, rng);
  return ds;
}

std::filesystem::path MetadataPath(const std::filesystem::path& csv_path) {
  auto p = csv_path;
  p.replace_extension(".json");
  return p;
}

void SaveDataset(const Dataset& ds, const std::filesystem::path& csv_path) {
  ds.Validate();
  std::ofstream out(csv_path);
  if (!out) throw Error(ErrorCode::kInvalidInput, "cannot write " + csv_path.string());
  for (Eigen::Index j = 0; j < ds.features.cols(); ++j) out << 'f' << j << ',';
  for (Eigen::Index j = 0; j < ds.concepts.cols(); ++j) out << 'c' << j << ',';
  out << "y\n";
  for (Eigen::Index i = 0; i < ds.size(); ++i) {
    for (Eigen::Index j = 0; j < ds.features.cols(); ++j) {
      out << FormatDouble(ds.features(i, j)) << ',';
    }
    for (Eigen::Index j = 0; j < ds.concepts.cols(); ++j) {
      out << static_cast<int>(ds.concepts(i, j)) << ',';
    }
    out << ds.labels[i] << '\n';
  }

  nlohmann::json meta = {{"name", ds.meta.name},
                         {"d", ds.meta.features},
                         {"r", ds.meta.concepts},
                         {"l", ds.meta.classes},
                         {"concept_names", ds.meta.concept_names},
                         {"class_names", ds.meta.class_names}};
  std::ofstream meta_out(MetadataPath(csv_path));
  meta_out << meta.dump(2) << '\n';
}

Dataset LoadDataset(const std::filesystem::path& csv_path) {
  std::ifstream meta_in(MetadataPath(csv_path));
  if (!meta_in) {
    throw Error(ErrorCode::kParseError, "missing metadata file " + MetadataPath(csv_path).string());
  }
  Dataset ds;
  try {
    const auto meta = nlohmann::json::parse(meta_in);
    ds.meta.name = meta.value("name", csv_path.stem().string());
    ds.meta.features = meta.at("d").get<Eigen::Index>();
    ds.meta.concepts = meta.at("r").get<Eigen::Index>();
    ds.meta.classes = meta.at("l").get<Eigen::Index>();
    ds.meta.concept_names = meta.value("concept_names", std::vector<std::string>{});
    ds.meta.class_names = meta.value("class_names", std::vector<std::string>{});
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, "bad metadata: " + std::string(e.what()));
  }
  const auto d = ds.meta.features;
  const auto r = ds.meta.concepts;

  std::ifstream in(csv_path);
  if (!in) throw Error(ErrorCode::kParseError, "cannot open " + csv_path.string());
  std::string line;
  std::getline(in, line);
  {
    std::ostringstream expected;
    for (Eigen::Index j = 0; j < d; ++j) expected << 'f' << j << ',';
    for (Eigen::Index j = 0; j < r; ++j) expected << 'c' << j << ',';
    expected << 'y';
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != expected.str()) throw Error(ErrorCode::kParseError, "line 1: unexpected header");
  }

  std::vector<double> feature_values;
  std::vector<double> concept_values;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      fields.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    const auto where = "line " + std::to_string(line_no) + ": ";
    if (static_cast<Eigen::Index>(fields.size()) != d + r + 1) {
      throw Error(ErrorCode::kParseError, where + "expected " + std::to_string(d + r + 1) +
                                              " fields, found " + std::to_string(fields.size()));
    }
    auto parse = [&](std::string_view f) {
      double v = 0.0;
      const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
      if (res.ec != std::errc() || res.ptr != f.data() + f.size()) {
        throw Error(ErrorCode::kParseError, where + "cannot parse '" + std::string(f) + "'");
      }
      return v;
    };
    for (Eigen::Index j = 0; j < d; ++j) feature_values.push_back(parse(fields[j]));
    for (Eigen::Index j = 0; j < r; ++j) {
      const double v = parse(fields[d + j]);
      if (v != 0.0 && v != 1.0) {
        throw Error(ErrorCode::kValidationError, where + "concept c" + std::to_string(j) +
                                                     " = " + std::string(fields[d + j]) +
                                                     " is not binary");
      }
      concept_values.push_back(v);
    }
    const double y = parse(fields.back());
    if (y != std::floor(y)) throw Error(ErrorCode::kParseError, where + "label is not an integer");
    ds.labels.push_back(static_cast<int>(y));
  }
  const auto n = static_cast<Eigen::Index>(ds.labels.size());
  ds.features = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      feature_values.data(), n, d);
  ds.concepts = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      concept_values.data(), n, r);
  ds.Validate();
  return ds;
}

Splits Split(const Dataset& ds, const SplitSpec& spec) {
  if (!(spec.train > 0 && spec.val > 0 && spec.test > 0) ||
      std::abs(spec.train + spec.val + spec.test - 1.0) > 1e-9) {
    throw Error(ErrorCode::kConfigError, "split fractions must be positive and sum to 1");
  }
  const auto n = ds.size();
  const auto n_train = static_cast<Eigen::Index>(std::llround(spec.train * n));
  const auto n_val = static_cast<Eigen::Index>(std::llround(spec.val * n));

  std::mt19937_64 rng(spec.seed);
  std::map<int, std::vector<Eigen::Index>> by_class;
  for (Eigen::Index i = 0; i < n; ++i) by_class[ds.labels[i]].push_back(i);
  const bool stratify = std::all_of(by_class.begin(), by_class.end(),
                                    [](const auto& kv) { return kv.second.size() >= 3; });

  std::vector<Eigen::Index> order;
  if (stratify) {
    // Spread each class evenly over [0,1) and sort by position so that every
    // prefix of the ordering carries each class in proportion.
    std::vector<std::pair<double, Eigen::Index>> keyed;
    std::uniform_real_distribution<double> jitter(0.0, 1.0);
    for (auto& [label, rows] : by_class) {
      std::shuffle(rows.begin(), rows.end(), rng);
      const double count = static_cast<double>(rows.size());
      for (std::size_t k = 0; k < rows.size(); ++k) {
        keyed.emplace_back((static_cast<double>(k) + jitter(rng)) / count, rows[k]);
      }
    }
    std::sort(keyed.begin(), keyed.end());
    for (const auto& [key, row] : keyed) order.push_back(row);
  } else {
    order.resize(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::shuffle(order.begin(), order.end(), rng);
  }

  const std::span<const Eigen::Index> all(order);
  Splits out;
  out.train = ds.Subset(all.subspan(0, n_train));
  out.val = ds.Subset(all.subspan(n_train, n_val));
  out.test = ds.Subset(all.subspan(n_train + n_val));
  return out;
}

}  // namespace cfcbm
