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

#include "cfcbm/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "cfcbm/errors.hpp"

namespace cfcbm {

void MetricReport::Add(const std::string& name, double value) { values_[name].push_back(value); }

MetricSummary MetricReport::Summary(const std::string& name) const {
  const auto it = values_.find(name);
  if (it == values_.end() || it->second.empty()) {
    throw Error(ErrorCode::kNotFound, "metric '" + name + "' not in report");
  }
  const auto& v = it->second;
  MetricSummary s;
  s.values = v;
  s.n_runs = static_cast<int>(v.size());
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    const double sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
    s.stderr_ = sd / std::sqrt(static_cast<double>(v.size()));
  }
  return s;
}

std::vector<std::string> MetricReport::Names() const {
  std::vector<std::string> names;
  for (const auto& [name, v] : values_) names.push_back(name);
  return names;
}

nlohmann::json MetricReport::ToJson() const {
  nlohmann::json metrics = nlohmann::json::object();
  for (const auto& name : Names()) {
    const auto s = Summary(name);
    metrics[name] = {{"mean", s.mean}, {"stderr", s.stderr_}, {"n_runs", s.n_runs},
                     {"values", s.values}};
  }
  return {{"metrics", metrics}, {"provenance", notes_}};
}

MetricReport MetricReport::FromJson(const nlohmann::json& doc) {
  MetricReport r;
  for (const auto& [name, entry] : doc.at("metrics").items()) {
    for (double v : entry.at("values")) r.Add(name, v);
  }
  if (doc.contains("provenance")) r.notes_ = doc.at("provenance");
  return r;
}

std::string MetricReport::ToMarkdown(const std::string& title) const {
  std::ostringstream os;
  os << "# " << title << "\n\n| Metric | Mean ± SE | Runs |\n|---|---|---|\n";
  char buf[96];
  for (const auto& name : Names()) {
    const auto s = Summary(name);
    std::snprintf(buf, sizeof(buf), "%.4f ± %.4f", s.mean, s.stderr_);
    os << "| " << name << " | " << buf << " | " << s.n_runs << " |\n";
  }
  return os.str();
}

void MetricReport::Write(const std::filesystem::path& json_path,
                         const std::filesystem::path& md_path, const std::string& title) const {
  std::ofstream json_out(json_path);
  if (!json_out) throw Error(ErrorCode::kInvalidInput, "cannot write " + json_path.string());
  json_out << ToJson().dump(2) << '\n';
  std::ofstream md_out(md_path);
  md_out << ToMarkdown(title);
}

}  // namespace cfcbm
