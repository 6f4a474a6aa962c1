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

#include <vector>

#include "cfcbm/model.hpp"

namespace cfcbm {

/// Adam with the usual defaults (beta1 0.9, beta2 0.999, eps 1e-8).
class Adam {
 public:
  struct Options {
    double learning_rate = 0.005;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
  };

  Adam(const ModelParams& params, Options options);

  /// One update of `params` using `grads` (same layout).
  void Step(ModelParams& params, ModelParams& grads);

  long steps() const { return steps_; }

 private:
  Options options_;
  std::vector<Vector> first_moment_;
  std::vector<Vector> second_moment_;
  long steps_ = 0;
};

}  // namespace cfcbm
