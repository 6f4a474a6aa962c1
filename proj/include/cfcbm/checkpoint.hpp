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

#include <filesystem>

#include "cfcbm/model.hpp"

namespace cfcbm {

inline constexpr int kCheckpointFormatVersion = 1;

/// JSON document with format version, dims, seed, mode and every tensor as a
/// row-major array. Doubles are written with round-trip precision.
void SaveCheckpoint(const ModelParams& params, const std::filesystem::path& path);

/// Throws kVersionMismatch for another format version and kCorruptFile for
/// anything unreadable or inconsistent.
ModelParams LoadCheckpoint(const std::filesystem::path& path);

std::string CheckpointToString(const ModelParams& params);
ModelParams CheckpointFromString(const std::string& text);

}  // namespace cfcbm
