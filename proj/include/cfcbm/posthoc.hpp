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
#include <optional>
#include <random>

#include "cfcbm/engine.hpp"

namespace cfcbm {

/// Budget of the latent-perturbation search.
struct SearchConfig {
  double max_radius = 128.0;
  int radius_steps = 32;
  int samples_per_radius = 64;
  std::uint64_t seed = 0;

  void Validate() const;
};

struct PosthocResult {
  std::optional<Counterfactual> counterfactual;  // empty when the budget ran out
  double radius = 0.0;                           // success radius
  int candidates_evaluated = 0;
};

/// Post-hoc counterfactual search over the latent space of a plain CBM:
/// starting from the posterior mean, probe z + rho * u for u uniform on the
/// unit sphere with rho growing in equal steps up to max_radius. At the first
/// radius that yields a valid candidate, return the valid candidate with the
/// fewest concept flips (ties: smaller perturbation norm, then draw order).
///
/// Only accepts ModelMode::kCbm models.
PosthocResult PosthocSearch(const ModelParams& cbm_model, const Vector& x, int target,
                            const SearchConfig& config);

}  // namespace cfcbm
