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

#include <cmath>
#include <fstream>
#include <sstream>

#include "cfcbm/errors.hpp"
#include "cfcbm/report.hpp"
#include "support.hpp"

using namespace cfcbm;

TEST_CASE("summary uses the sample standard error") {
  MetricReport r;
  for (double v : {1.0, 2.0, 3.0, 4.0, 5.0}) r.Add("auc", v);
  const auto s = r.Summary("auc");
  CHECK(s.n_runs == 5);
  CHECK(s.mean == doctest::Approx(3.0));
  CHECK(s.stderr_ == doctest::Approx(std::sqrt(2.5) / std::sqrt(5.0)));
}

TEST_CASE("single run has zero standard error") {
  MetricReport r;
  r.Add("x", 0.7);
  CHECK(r.Summary("x").stderr_ == 0.0);
  CHECK_THROWS_AS(r.Summary("y"), Error);
}

TEST_CASE("json round trip and sorted names") {
  MetricReport r;
  r.Add("zeta", 1.0);
  r.Add("alpha", 2.0);
  r.Add("alpha", 4.0);
  r.SetNote("seeds", {0, 1});
  CHECK(r.Names() == std::vector<std::string>{"alpha", "zeta"});
  const auto j = r.ToJson();
  CHECK(j["metrics"]["alpha"]["n_runs"] == 2);
  const MetricReport back = MetricReport::FromJson(j);
  CHECK(back.ToJson() == j);
}

TEST_CASE("markdown table") {
  MetricReport r;
  r.Add("task_auc", 0.5);
  r.Add("task_auc", 1.0);
  const std::string md = r.ToMarkdown("Run");
  CHECK(md.find("# Run") == 0);
  CHECK(md.find("| task_auc | 0.7500 ± 0.2500 | 2 |") != std::string::npos);
}

TEST_CASE("write produces both files") {
  MetricReport r;
  r.Add("a", 1.0);
  const auto dir = testing::ScratchDir("report");
  r.Write(dir / "r.json", dir / "r.md", "t");
  std::ifstream in(dir / "r.json");
  std::stringstream ss;
  ss << in.rdbuf();
  CHECK(ss.str().find("\"a\"") != std::string::npos);
  CHECK(std::filesystem::exists(dir / "r.md"));
}
