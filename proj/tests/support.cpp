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

#include "support.hpp"

#include <random>

#include "cfcbm/train.hpp"

namespace cfcbm::testing {

ModelParams MicroModel(std::uint64_t seed) {
  ModelParams p = InitParams({.features = 4, .concepts = 3, .classes = 2, .latent = 8}, seed);
  std::mt19937_64 rng(seed + 1);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  ForEachTensor(p, [&](const std::string&, auto& t) {
    t *= 1.5;
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] += u(rng);
  });
  return p;
}

Batch MicroBatch() {
  Batch b;
  b.features.resize(4, 4);
  b.features << 0.5, -1.0, 0.3, 1.2,
                -0.2, 0.8, -0.7, 0.1,
                1.1, 0.0, -0.4, -0.9,
                0.3, -0.6, 0.9, 0.4;
  b.concepts.resize(3, 4);
  b.concepts << 1, 0, 1, 0,
                0, 1, 1, 0,
                1, 1, 0, 0;
  b.labels = {1, 0, 1, 0};
  return b;
}

std::filesystem::path ScratchDir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("cfcbm_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

const SmallRun& SmallDsprites() {
  static const SmallRun run = [] {
    SmallRun r;
    r.data = Split(GenDspritesLike(1500, 5), {.seed = 5});
    TrainConfig c;
    c.epochs = 30;
    c.batch_size = 128;
    c.latent = 32;
    c.seed = 5;
    r.cfcbm = Train(r.data.train, r.data.val, c).best_params;
    c.mode = ModelMode::kCbm;
    c.weights = LossWeights::PlainCbm();
    r.cbm = Train(r.data.train, r.data.val, c).best_params;
    return r;
  }();
  return run;
}

}  // namespace cfcbm::testing
