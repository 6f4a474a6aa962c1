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
#include <string>

#include "cfcbm/dataset.hpp"
#include "cfcbm/loss.hpp"
#include "cfcbm/model.hpp"

namespace cfcbm::testing {

/// d=4, r=3, l=2, h=8 with weights scaled up so every term is non-trivial.
ModelParams MicroModel(std::uint64_t seed = 11);

/// Four samples for MicroModel.
Batch MicroBatch();

/// A fresh empty directory under the system temp dir.
std::filesystem::path ScratchDir(const std::string& name);

/// Small dSprites-like model trained in a few seconds; cached per process.
struct SmallRun {
  Splits data;
  ModelParams cfcbm;
  ModelParams cbm;
};
const SmallRun& SmallDsprites();

}  // namespace cfcbm::testing
