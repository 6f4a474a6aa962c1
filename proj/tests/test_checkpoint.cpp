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

#include <doctest.h>

#include <fstream>

#include <json.hpp>

#include "cfcbm/checkpoint.hpp"
#include "support.hpp"

using namespace cfcbm;

namespace {

ErrorCode CodeOf(const std::string& text) {
  try {
    CheckpointFromString(text);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kNotFound;
}

}  // namespace

TEST_CASE("string round trip is exact") {
  const ModelParams p = testing::MicroModel();
  const ModelParams q = CheckpointFromString(CheckpointToString(p));
  CHECK(q.dims == p.dims);
  CHECK(q.seed == p.seed);
  CHECK(q.mode == p.mode);
  CHECK(q.Checksum() == p.Checksum());
}

TEST_CASE("file round trip") {
  ModelParams p = InitParams({6, 4, 3, 5}, 2, ModelMode::kCbm);
  const auto path = testing::ScratchDir("ckpt") / "m.json";
  SaveCheckpoint(p, path);
  const ModelParams q = LoadCheckpoint(path);
  CHECK(q.Checksum() == p.Checksum());
  CHECK(q.mode == ModelMode::kCbm);
}

TEST_CASE("truncated checkpoint is corrupt") {
  const std::string text = CheckpointToString(testing::MicroModel());
  CHECK(CodeOf(text.substr(0, text.size() / 2)) == ErrorCode::kCorruptFile);
  CHECK(CodeOf("") == ErrorCode::kCorruptFile);
}

TEST_CASE("wrong version is rejected") {
  auto doc = nlohmann::json::parse(CheckpointToString(testing::MicroModel()));
  doc["format_version"] = kCheckpointFormatVersion + 1;
  CHECK(CodeOf(doc.dump()) == ErrorCode::kVersionMismatch);
}

TEST_CASE("tensor shape mismatch is corrupt") {
  auto doc = nlohmann::json::parse(CheckpointToString(testing::MicroModel()));
  doc["tensors"]["task_head.weight"]["data"].erase(0);
  CHECK(CodeOf(doc.dump()) == ErrorCode::kCorruptFile);
  auto missing = nlohmann::json::parse(CheckpointToString(testing::MicroModel()));
  missing["tensors"].erase("cf_prior.mean.bias");
  CHECK(CodeOf(missing.dump()) == ErrorCode::kCorruptFile);
}

TEST_CASE("missing file") {
  CHECK_THROWS_AS(LoadCheckpoint("/nonexistent/ckpt.json"), Error);
}
