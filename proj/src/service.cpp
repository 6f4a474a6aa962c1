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

#include "cfcbm/service.hpp"

#include <cstdio>
#include <random>

#include <httplib.h>

#include "cfcbm/checkpoint.hpp"
#include "cfcbm/errors.hpp"
#include "cfcbm/posthoc.hpp"

namespace cfcbm {

using nlohmann::json;

namespace {

// Failure carrying the stage that produced it.
struct RequestError {
  ErrorCode code;
  std::string stage;
  std::string message;
};

int StatusFor(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNotFound:
      return 404;
    case ErrorCode::kUnsupportedOperation:
      return 422;
    case ErrorCode::kInvalidInput:
    case ErrorCode::kInvalidDimension:
    case ErrorCode::kParseError:
    case ErrorCode::kValidationError:
    case ErrorCode::kConfigError:
      return 400;
    default:
      return 500;
  }
}

Reply ErrorReply(const RequestError& e, const std::string& model_id) {
  return {StatusFor(e.code),
          {{"code", std::string(ErrorCodeName(e.code))},
           {"stage", e.stage},
           {"message", e.message},
           {"model_id", model_id}}};
}

template <typename Fn>
Reply Guard(const std::string& model_id, Fn&& fn) {
  try {
    return fn();
  } catch (const RequestError& e) {
    return ErrorReply(e, model_id);
  } catch (const Error& e) {
    return ErrorReply({e.code(), "engine", e.what()}, model_id);
  } catch (const json::exception& e) {
    return ErrorReply({ErrorCode::kParseError, "request", e.what()}, model_id);
  } catch (const std::exception& e) {
    return ErrorReply({ErrorCode::kInvalidInput, "engine", e.what()}, model_id);
  }
}

void Require(bool ok, const std::string& message) {
  if (!ok) throw RequestError{ErrorCode::kInvalidInput, "request", message};
}

std::vector<int> Indices(const Vector& v) {
  std::vector<int> out;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (v(i) > 0.5) out.push_back(static_cast<int>(i));
  }
  return out;
}

std::vector<double> ToStd(const Vector& v) { return {v.data(), v.data() + v.size()}; }

std::vector<std::string> DefaultNames(const std::string& prefix, Eigen::Index n) {
  std::vector<std::string> names;
  for (Eigen::Index i = 0; i < n; ++i) names.push_back(prefix + std::to_string(i));
  return names;
}

std::uint64_t Fnv1a(const void* data, std::size_t bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string Hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

InferenceService::InferenceService(ModelParams model, ServiceOptions options)
    : model_(std::move(model)), options_(std::move(options)) {
  if (options_.model_id.empty()) options_.model_id = "model";
  if (options_.concept_names.empty()) {
    options_.concept_names = DefaultNames("c", model_.dims.concepts);
  }
  if (options_.class_names.empty()) options_.class_names = DefaultNames("y", model_.dims.classes);
  if (static_cast<Eigen::Index>(options_.concept_names.size()) != model_.dims.concepts ||
      static_cast<Eigen::Index>(options_.class_names.size()) != model_.dims.classes) {
    throw Error(ErrorCode::kValidationError, "name lists do not match the model dimensions");
  }
  if (options_.demo && (options_.demo->meta.features != model_.dims.features ||
                        options_.demo->meta.concepts != model_.dims.concepts)) {
    throw Error(ErrorCode::kValidationError, "demo set does not match the model dimensions");
  }
}

InferenceService InferenceService::FromCheckpoint(const std::filesystem::path& path,
                                                  ServiceOptions options) {
  if (options.model_id.empty()) {
    options.model_id = path.filename().string();
    for (const std::string suffix : {".json", ".ckpt"}) {
      if (options.model_id.ends_with(suffix)) {
        options.model_id.resize(options.model_id.size() - suffix.size());
      }
    }
  }
  return InferenceService(LoadCheckpoint(path), std::move(options));
}

std::string InferenceService::WeightsHash() const { return Hex(model_.Checksum()); }

Reply InferenceService::ModelInfo() const {
  return {200,
          {{"model_id", options_.model_id},
           {"seed", nullptr},
           {"d", model_.dims.features},
           {"r", model_.dims.concepts},
           {"l", model_.dims.classes},
           {"h", model_.dims.latent},
           {"mode", ModelModeName(model_.mode)},
           {"training_seed", model_.seed},
           {"concept_names", options_.concept_names},
           {"class_names", options_.class_names}}};
}

Reply InferenceService::ModelHash() const {
  return {200, {{"model_id", options_.model_id}, {"seed", nullptr}, {"hash", WeightsHash()}}};
}

Reply InferenceService::Samples(int limit) const {
  return Guard(options_.model_id, [&]() -> Reply {
    if (!options_.demo) throw RequestError{ErrorCode::kNotFound, "request", "no demo set loaded"};
    const auto& ds = *options_.demo;
    const Eigen::Index n = std::min<Eigen::Index>(ds.size(), std::max(limit, 0));
    json rows = json::array();
    for (Eigen::Index i = 0; i < n; ++i) {
      rows.push_back({{"index", i},
                      {"features", ToStd(ds.features.row(i).transpose())},
                      {"concepts", ToStd(ds.concepts.row(i).transpose())},
                      {"label", ds.labels[static_cast<std::size_t>(i)]}});
    }
    return {200, {{"model_id", options_.model_id}, {"seed", nullptr}, {"samples", rows}}};
  });
}

std::string InferenceService::CacheKey(const Vector& x, InferenceMode mode,
                                       std::uint64_t seed) const {
  std::uint64_t h = Fnv1a(x.data(), sizeof(double) * static_cast<std::size_t>(x.size()));
  const int m = static_cast<int>(mode);
  h = Fnv1a(&m, sizeof(m), h);
  h = Fnv1a(&seed, sizeof(seed), h);
  return Hex(h);
}

Prediction InferenceService::RunPredict(const Vector& x, InferenceMode mode,
                                        std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  Prediction p = cfcbm::Predict(model_, x, mode, rng);
  if (options_.cache_capacity > 0) {
    const std::string key = CacheKey(x, mode, seed);
    std::lock_guard lock(cache_mu_);
    if (!cache_.contains(key)) {
      cache_order_.push_back(key);
      if (cache_order_.size() > options_.cache_capacity) {
        cache_.erase(cache_order_.front());
        cache_order_.pop_front();
      }
    }
    cache_[key] = p;
  }
  return p;
}

namespace {

InferenceMode ModeOf(const json& request) {
  try {
    return ParseInferenceMode(request.value("mode", std::string("best_bet")));
  } catch (const Error& e) {
    throw RequestError{ErrorCode::kInvalidInput, "request", e.what()};
  }
}

std::uint64_t SeedOf(const json& request) {
  if (!request.contains("seed")) return 0;
  Require(request.at("seed").is_number_integer(), "seed must be an integer");
  return request.at("seed").get<std::uint64_t>();
}

}  // namespace

Prediction InferenceService::Resolve(const json& request, InferenceMode mode,
                                     std::uint64_t seed) const {
  if (request.contains("features")) {
    const auto& f = request.at("features");
    Require(f.is_array(), "features must be an array");
    Require(static_cast<Eigen::Index>(f.size()) == model_.dims.features,
            "features must have length " + std::to_string(model_.dims.features));
    Vector x(model_.dims.features);
    for (std::size_t i = 0; i < f.size(); ++i) {
      Require(f[i].is_number(), "features must be numbers");
      x(static_cast<Eigen::Index>(i)) = f[i].get<double>();
    }
    return RunPredict(x, mode, seed);
  }
  if (request.contains("prediction_id")) {
    const auto id = request.at("prediction_id").get<std::string>();
    std::lock_guard lock(cache_mu_);
    const auto it = cache_.find(id);
    if (it == cache_.end()) {
      throw RequestError{ErrorCode::kNotFound, "request", "unknown or expired prediction_id"};
    }
    return it->second;
  }
  throw RequestError{ErrorCode::kInvalidInput, "request", "features or prediction_id required"};
}

json InferenceService::PredictionJson(const Prediction& p) const {
  return {{"concept_probs", ToStd(p.concept_probs)},
          {"concepts", ToStd(p.concepts)},
          {"class_probs", ToStd(p.class_probs)},
          {"label", p.label},
          {"class_name", options_.class_names[static_cast<std::size_t>(p.label)]}};
}

json InferenceService::CounterfactualJson(const Counterfactual& cf, const Vector& factual) const {
  std::vector<int> added, removed;
  for (Eigen::Index i = 0; i < factual.size(); ++i) {
    if (cf.concepts(i) > 0.5 && factual(i) < 0.5) added.push_back(static_cast<int>(i));
    if (cf.concepts(i) < 0.5 && factual(i) > 0.5) removed.push_back(static_cast<int>(i));
  }
  return {{"target", cf.target},
          {"concept_probs", ToStd(cf.concept_probs)},
          {"concepts", ToStd(cf.concepts)},
          {"active", Indices(cf.concepts)},
          {"class_probs", ToStd(cf.class_probs)},
          {"label", cf.label},
          {"sparsity", cf.sparsity},
          {"valid", cf.valid},
          {"added", added},
          {"removed", removed}};
}

Reply InferenceService::Predict(const json& request) const {
  return Guard(options_.model_id, [&]() -> Reply {
    Require(request.is_object(), "body must be a JSON object");
    const auto mode = ModeOf(request);
    const auto seed = SeedOf(request);
    Require(request.contains("features"), "features required");
    const Prediction p = Resolve(request, mode, seed);
    json body = {{"model_id", options_.model_id},
                 {"seed", seed},
                 {"mode", InferenceModeName(mode)},
                 {"prediction", PredictionJson(p)}};
    if (options_.cache_capacity > 0) {
      Vector x(model_.dims.features);
      for (Eigen::Index i = 0; i < x.size(); ++i) {
        x(i) = request.at("features")[static_cast<std::size_t>(i)].get<double>();
      }
      body["prediction_id"] = CacheKey(x, mode, seed);
    }
    return {200, body};
  });
}

Reply InferenceService::IntervenePost(const json& request) const {
  return Guard(options_.model_id, [&]() -> Reply {
    Require(request.is_object(), "body must be a JSON object");
    const auto mode = ModeOf(request);
    const auto seed = SeedOf(request);
    const Prediction p = Resolve(request, mode, seed);
    InterventionSet iv;
    if (request.contains("interventions")) {
      Require(request.at("interventions").is_array(), "interventions must be an array");
      for (const auto& e : request.at("interventions")) {
        Require(e.is_object() && e.contains("index") && e.contains("value"),
                "each intervention needs index and value");
        iv.entries.emplace_back(e.at("index").get<Eigen::Index>(), e.at("value").get<double>());
      }
    }
    const InterventionResult r = Intervene(model_, p, iv);
    Prediction out = p;
    out.concepts = r.concepts;
    out.class_probs = r.class_probs;
    out.label = r.label;
    for (const auto& [index, value] : iv.entries) out.concept_probs(index) = value;
    return {200,
            {{"model_id", options_.model_id},
             {"seed", seed},
             {"mode", InferenceModeName(mode)},
             {"prediction", PredictionJson(out)}}};
  });
}

Reply InferenceService::CounterfactualPost(const json& request) const {
  return Guard(options_.model_id, [&]() -> Reply {
    Require(request.is_object(), "body must be a JSON object");
    const auto mode = ModeOf(request);
    const auto seed = SeedOf(request);
    Require(request.contains("target_class") && request.at("target_class").is_number_integer(),
            "target_class must be an integer");
    const int target = request.at("target_class").get<int>();
    Require(target >= 0 && target < model_.dims.classes, "target_class out of range");
    const int n = request.value("n_samples", mode == InferenceMode::kBestBet ? 1 : 5);
    Require(n >= 1 && n <= 1000, "n_samples must lie in [1, 1000]");
    const Prediction p = Resolve(request, mode, seed);

    std::vector<Counterfactual> cfs;
    if (model_.mode == ModelMode::kCfCbm) {
      std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
      cfs = Imagine(model_, p, target, mode, n, rng);
    } else {
      Require(request.contains("features"), "post-hoc search needs features");
      Vector x(model_.dims.features);
      for (Eigen::Index i = 0; i < x.size(); ++i) {
        x(i) = request.at("features")[static_cast<std::size_t>(i)].get<double>();
      }
      SearchConfig search;
      search.seed = seed;
      auto found = PosthocSearch(model_, x, target, search);
      if (!found.counterfactual) {
        throw RequestError{ErrorCode::kNotFound, "search", "no counterfactual within budget"};
      }
      cfs.push_back(*found.counterfactual);
    }
    json list = json::array();
    for (const auto& cf : cfs) list.push_back(CounterfactualJson(cf, p.concepts));
    return {200,
            {{"model_id", options_.model_id},
             {"seed", seed},
             {"mode", InferenceModeName(mode)},
             {"factual", PredictionJson(p)},
             {"counterfactuals", list}}};
  });
}

Reply InferenceService::TaskIntervention(const json& request) const {
  return Guard(options_.model_id, [&]() -> Reply {
    Require(request.is_object(), "body must be a JSON object");
    const auto mode = ModeOf(request);
    const auto seed = SeedOf(request);
    Require(request.contains("corrected_class") && request.at("corrected_class").is_number_integer(),
            "corrected_class must be an integer");
    const int corrected = request.at("corrected_class").get<int>();
    Require(corrected >= 0 && corrected < model_.dims.classes, "corrected_class out of range");
    const double noise = request.value("noise", 0.0);
    Require(noise >= 0.0 && noise <= 1.0, "noise must lie in [0, 1]");
    Prediction p = Resolve(request, mode, seed);

    std::mt19937_64 rng(seed ^ 0x5851f42d4c957f2dULL);
    if (noise > 0.0) {
      std::bernoulli_distribution flip(noise);
      for (Eigen::Index i = 0; i < p.concepts.size(); ++i) {
        if (flip(rng)) p.concepts(i) = 1.0 - p.concepts(i);
      }
      p.class_probs = PredictTask(model_, p.concepts).probs;
      p.label = static_cast<int>(Argmax(p.class_probs));
    }
    const Counterfactual cf = cfcbm::TaskDrivenIntervention(model_, p, corrected, mode, rng);
    return {200,
            {{"model_id", options_.model_id},
             {"seed", seed},
             {"mode", InferenceModeName(mode)},
             {"factual", PredictionJson(p)},
             {"proposal", CounterfactualJson(cf, p.concepts)}}};
  });
}

Reply InferenceService::Handle(const std::string& method, const std::string& path,
                               const std::string& body) const {
  if (method == "GET") {
    if (path == "/v1/model/info") return ModelInfo();
    if (path == "/v1/model/hash") return ModelHash();
    if (path == "/v1/samples") return Samples(20);
  } else if (method == "POST") {
    json request;
    try {
      request = json::parse(body);
    } catch (const json::exception& e) {
      return ErrorReply({ErrorCode::kParseError, "request", e.what()}, options_.model_id);
    }
    if (path == "/v1/predict") return Predict(request);
    if (path == "/v1/intervene") return IntervenePost(request);
    if (path == "/v1/counterfactual") return CounterfactualPost(request);
    if (path == "/v1/task-intervention") return TaskIntervention(request);
  }
  return ErrorReply({ErrorCode::kNotFound, "routing", method + " " + path + " is not an endpoint"},
                    options_.model_id);
}

void InferenceService::Mount(httplib::Server& server) const {
  const std::string origin = options_.cors_origin;
  server.set_default_headers({{"Access-Control-Allow-Origin", origin},
                              {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                              {"Access-Control-Allow-Headers", "Content-Type"}});
  auto send = [](httplib::Response& res, const Reply& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  server.Options(R"(/v1/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.status = 204;
  });
  server.Get("/v1/samples", [this, send](const httplib::Request& req, httplib::Response& res) {
    int limit = 20;
    if (req.has_param("limit")) limit = std::atoi(req.get_param_value("limit").c_str());
    send(res, Samples(limit));
  });
  server.Get(R"(/v1/.*)", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, Handle("GET", req.path, ""));
  });
  server.Post(R"(/v1/.*)", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, Handle("POST", req.path, req.body));
  });
}

void Serve(const InferenceService& service, const std::string& host, int port) {
  httplib::Server server;
  service.Mount(server);
  if (!server.bind_to_port(host, port)) {
    throw Error(ErrorCode::kInvalidInput, "cannot bind " + host + ":" + std::to_string(port));
  }
  server.listen_after_bind();
}

}  // namespace cfcbm
