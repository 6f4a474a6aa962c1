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

#include "cfcbm/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cfcbm/errors.hpp"

namespace cfcbm {

using nlohmann::json;

std::string CheckpointToString(const ModelParams& params) {
  json doc;
  doc["format_version"] = kCheckpointFormatVersion;
  doc["dims"] = {{"d", params.dims.features},
                 {"r", params.dims.concepts},
                 {"l", params.dims.classes},
                 {"h", params.dims.latent}};
  doc["seed"] = params.seed;
  doc["mode"] = ModelModeName(params.mode);
  json tensors = json::object();
  ForEachTensor(params, [&](const std::string& name, const auto& t) {
    std::vector<double> row_major;
    row_major.reserve(static_cast<std::size_t>(t.size()));
    for (Eigen::Index i = 0; i < t.rows(); ++i) {
      for (Eigen::Index j = 0; j < t.cols(); ++j) row_major.push_back(t(i, j));
    }
    tensors[name] = {{"rows", t.rows()}, {"cols", t.cols()}, {"data", std::move(row_major)}};
  });
  doc["tensors"] = std::move(tensors);
  return doc.dump();
}

ModelParams CheckpointFromString(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kCorruptFile, std::string("checkpoint is not valid JSON: ") + e.what());
  }
  try {
    const int version = doc.at("format_version").get<int>();
    if (version != kCheckpointFormatVersion) {
      throw Error(ErrorCode::kVersionMismatch,
                  "checkpoint format version " + std::to_string(version) + ", expected " +
                      std::to_string(kCheckpointFormatVersion));
    }
    const auto& dims = doc.at("dims");
    const Dims d{dims.at("d").get<Eigen::Index>(), dims.at("r").get<Eigen::Index>(),
                 dims.at("l").get<Eigen::Index>(), dims.at("h").get<Eigen::Index>()};
    ModelParams params = InitParams(d, doc.at("seed").get<std::uint64_t>(),
                                    ParseModelMode(doc.at("mode").get<std::string>()));
    const auto& tensors = doc.at("tensors");
    ForEachTensor(params, [&](const std::string& name, auto& t) {
      const auto& entry = tensors.at(name);
      const auto rows = entry.at("rows").get<Eigen::Index>();
      const auto cols = entry.at("cols").get<Eigen::Index>();
      const auto& data = entry.at("data");
      if (rows != t.rows() || cols != t.cols() ||
          data.size() != static_cast<std::size_t>(rows * cols)) {
        throw Error(ErrorCode::kCorruptFile, "tensor " + name + " has inconsistent shape");
      }
      std::size_t k = 0;
      for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) t(i, j) = data[k++].get<double>();
      }
    });
    if (tensors.size() != static_cast<std::size_t>(FlatViews(params).size())) {
      throw Error(ErrorCode::kCorruptFile, "checkpoint has unexpected tensors");
    }
    return params;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kCorruptFile, std::string("malformed checkpoint: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kVersionMismatch || e.code() == ErrorCode::kCorruptFile) throw;
    throw Error(ErrorCode::kCorruptFile, std::string("malformed checkpoint: ") + e.what());
  }
}

void SaveCheckpoint(const ModelParams& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kInvalidInput, "cannot write checkpoint " + path.string());
  out << CheckpointToString(params);
}

ModelParams LoadCheckpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kCorruptFile, "cannot read checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return CheckpointFromString(buf.str());
}

}  // namespace cfcbm
