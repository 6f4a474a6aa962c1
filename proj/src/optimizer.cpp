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

#include "cfcbm/optimizer.hpp"

#include <cmath>

namespace cfcbm {

Adam::Adam(const ModelParams& params, Options options) : options_(options) {
  ForEachTensor(params, [&](const std::string&, const auto& t) {
    first_moment_.push_back(Vector::Zero(t.size()));
    second_moment_.push_back(Vector::Zero(t.size()));
  });
}

void Adam::Step(ModelParams& params, ModelParams& grads) {
  ++steps_;
  const double correction1 = 1.0 - std::pow(options_.beta1, static_cast<double>(steps_));
  const double correction2 = 1.0 - std::pow(options_.beta2, static_cast<double>(steps_));
  const double step_size = options_.learning_rate / correction1;

  auto values = FlatViews(params);
  auto gradients = FlatViews(grads);
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto& m = first_moment_[i];
    auto& v = second_moment_[i];
    const auto& g = gradients[i];
    m = options_.beta1 * m + (1.0 - options_.beta1) * g;
    v = options_.beta2 * v + (1.0 - options_.beta2) * g.cwiseAbs2();
    values[i].array() -=
        step_size * m.array() / ((v.array() / correction2).sqrt() + options_.epsilon);
  }
}

}  // namespace cfcbm
