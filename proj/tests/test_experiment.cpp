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
#include <sstream>

#include "cfcbm/experiment.hpp"
#include "support.hpp"

using namespace cfcbm;

namespace {

ExperimentConfig Tiny(const std::string& name) {
  ExperimentConfig c;
  c.name = name;
  c.dataset.kind = "dsprites";
  c.dataset.n = 200;
  c.train.epochs = 2;
  c.train.batch_size = 64;
  c.train.latent = 8;
  c.seeds = {0};
  c.metrics = {"task_auc"};
  c.output_dir = testing::ScratchDir(name);
  return c;
}

std::string Slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("one seed and one metric") {
  const auto c = Tiny("exp_one");
  const auto r = RunExperiment(c);
  REQUIRE(r.report.Names().size() == 1);
  CHECK(r.report.Summary(r.report.Names().front()).n_runs == 1);
  CHECK(std::filesystem::exists(c.output_dir / "report.json"));
  CHECK(std::filesystem::exists(c.output_dir / "report.md"));
  CHECK(std::filesystem::exists(c.output_dir / "timings.json"));
  CHECK(std::filesystem::exists(c.output_dir / "seed_0" / "cfcbm.ckpt.json"));
  CHECK(std::filesystem::exists(c.output_dir / "seed_0" / "cfcbm_history.csv"));
}

TEST_CASE("five seeds fill the standard error") {
  auto c = Tiny("exp_five");
  c.seeds = {0, 1, 2, 3, 4};
  const auto r = RunExperiment(c);
  const auto s = r.report.Summary("cfcbm.task_auc");
  CHECK(s.n_runs == 5);
  CHECK(s.values.size() == 5);
  CHECK(s.stderr_ > 0.0);
}

TEST_CASE("identical configs give byte-identical reports, parallel or not") {
  auto c = Tiny("exp_det_a");
  c.seeds = {3, 4};
  c.metrics = {"task_auc", "concept_auc", "validity", "variability_multiverse", "acc_int", "cace"};
  c.baseline = c.train;
  c.baseline->mode = ModelMode::kCbm;
  c.baseline->weights = LossWeights::PlainCbm();
  c.search.radius_steps = 4;
  c.search.samples_per_radius = 8;
  RunExperiment(c);
  const std::string first = Slurp(c.output_dir / "report.json");
  RunExperiment(c);
  CHECK(Slurp(c.output_dir / "report.json") == first);
  c.parallel_seeds = true;
  c.output_dir = testing::ScratchDir("exp_det_b");
  RunExperiment(c);
  CHECK(Slurp(c.output_dir / "report.json") == first);
  CHECK(first.find("posthoc.validity") != std::string::npos);
  CHECK(first.find("cbm.cace.green") != std::string::npos);
  CHECK(first.find("cfcbm.acc_int@0.3") != std::string::npos);
}

TEST_CASE("a failing stage keeps its artifacts under failed/") {
  auto c = Tiny("exp_fail");
  c.train.mode = ModelMode::kCbm;
  c.train.weights = LossWeights::PlainCbm();
  c.metrics = {"acc_int"};
  try {
    RunExperiment(c);
    FAIL("expected a stage error");
  } catch (const StageError& e) {
    CHECK(e.stage() == "eval");
    CHECK(e.code() == ErrorCode::kUndefinedMetric);
  }
  CHECK(std::filesystem::exists(c.output_dir / "failed" / "seed_0" / "cbm.ckpt.json"));
  CHECK(std::filesystem::exists(c.output_dir / "failed" / "seed_0" / "error.json"));
  CHECK_FALSE(std::filesystem::exists(c.output_dir / "seed_0"));
}

TEST_CASE("config parsing and validation") {
  const nlohmann::json doc = {
      {"name", "x"},
      {"dataset", {{"kind", "dsprites_confounded"}, {"n", 500}, {"confound_rate", 0.9}}},
      {"train", {{"epochs", 3}}},
      {"baseline", true},
      {"seeds", {1, 2}},
      {"metrics", {"task_auc", "cace"}},
      {"search", {{"max_radius", 10.0}}}};
  const auto c = ExperimentConfigFromJson(doc);
  CHECK(c.dataset.confound_rate == 0.9);
  CHECK(c.train.epochs == 3);
  REQUIRE(c.baseline.has_value());
  CHECK(c.baseline->mode == ModelMode::kCbm);
  CHECK(c.baseline->epochs == 3);
  CHECK(c.baseline->weights.task == doctest::Approx(0.1));
  CHECK(c.search.max_radius == 10.0);

  auto bad = doc;
  bad["seeds"] = nlohmann::json::array();
  CHECK_THROWS_AS(ExperimentConfigFromJson(bad), Error);
  bad = doc;
  bad["metrics"] = {"accuracy_of_everything"};
  CHECK_THROWS_AS(ExperimentConfigFromJson(bad), Error);
  bad = doc;
  bad["dataset"]["kind"] = "csv";
  CHECK_THROWS_AS(ExperimentConfigFromJson(bad), Error);
  bad = doc;
  bad["seeds"] = {1, 1};
  CHECK_THROWS_AS(ExperimentConfigFromJson(bad), Error);
  CHECK_THROWS_AS(LoadExperimentConfig("/nonexistent.json"), Error);
}

TEST_CASE("mnist configs default to the mnist weights") {
  const auto c = ExperimentConfigFromJson(
      {{"dataset", {{"kind", "mnist_add"}, {"n", 100}}}, {"metrics", {"task_auc"}}});
  CHECK(c.train.weights.kl_z == doctest::Approx(2.0));
}

TEST_CASE("bundled configs parse") {
  for (const char* name : {"dsprites.json", "dsprites_confounded.json", "mnist_add.json"}) {
    const auto path = std::filesystem::path(CFCBM_SOURCE_DIR) / "configs" / name;
    CHECK_NOTHROW(LoadExperimentConfig(path));
  }
}

TEST_CASE("thread budget honors the environment") {
  setenv("CFX_THREADS", "3", 1);
  CHECK(ThreadBudget() == 3);
  unsetenv("CFX_THREADS");
  CHECK(ThreadBudget() >= 1);
}
