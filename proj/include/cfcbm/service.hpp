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
#include <list>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "cfcbm/dataset.hpp"
#include "cfcbm/engine.hpp"

namespace httplib {
class Server;
}

namespace cfcbm {

struct ServiceOptions {
  std::string model_id;  // defaults to the checkpoint file stem
  std::vector<std::string> concept_names;  // empty: c0, c1, ...
  std::vector<std::string> class_names;    // empty: y0, y1, ...
  std::optional<Dataset> demo;             // rows served from /v1/samples
  std::size_t cache_capacity = 256;        // 0 disables the prediction cache
  std::string cors_origin = "*";
};

/// Reply of one endpoint: HTTP status plus JSON body.
struct Reply {
  int status = 200;
  nlohmann::json body;
};

/// Request handling over a read-only model. Every handler is thread-safe.
/// Errors come back as {code, stage, message} with a 4xx/5xx status.
class InferenceService {
 public:
  InferenceService(ModelParams model, ServiceOptions options);

  static InferenceService FromCheckpoint(const std::filesystem::path& path,
                                         ServiceOptions options = {});

  Reply ModelInfo() const;
  Reply ModelHash() const;
  Reply Samples(int limit) const;
  Reply Predict(const nlohmann::json& request) const;
  Reply IntervenePost(const nlohmann::json& request) const;
  Reply CounterfactualPost(const nlohmann::json& request) const;
  Reply TaskIntervention(const nlohmann::json& request) const;

  /// Dispatches `method path` with a raw body; used by the HTTP binding.
  Reply Handle(const std::string& method, const std::string& path, const std::string& body) const;

  /// Installs the /v1/ routes and CORS handling on `server`.
  void Mount(httplib::Server& server) const;

  const std::string& model_id() const { return options_.model_id; }
  std::string WeightsHash() const;

 private:
  Prediction RunPredict(const Vector& x, InferenceMode mode, std::uint64_t seed) const;
  Prediction Resolve(const nlohmann::json& request, InferenceMode mode, std::uint64_t seed) const;
  nlohmann::json PredictionJson(const Prediction& p) const;
  nlohmann::json CounterfactualJson(const Counterfactual& cf, const Vector& factual) const;
  std::string CacheKey(const Vector& x, InferenceMode mode, std::uint64_t seed) const;

  ModelParams model_;
  ServiceOptions options_;

  mutable std::mutex cache_mu_;
  mutable std::list<std::string> cache_order_;
  mutable std::unordered_map<std::string, Prediction> cache_;
};

/// Blocks serving on host:port. Throws Error(kInvalidInput) on bind failure.
void Serve(const InferenceService& service, const std::string& host, int port);

}  // namespace cfcbm
