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
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace cfcbm {

struct MetricSummary {
  double mean = 0.0;
  double stderr_ = 0.0;  // sample standard deviation / sqrt(n); 0 for one run
  int n_runs = 0;
  std::vector<double> values;
};

/// Named metrics aggregated over seeds. Names sort lexicographically so the
/// serialized form is stable.
class MetricReport {
 public:
  void Add(const std::string& name, double value);

  MetricSummary Summary(const std::string& name) const;
  std::vector<std::string> Names() const;
  bool Has(const std::string& name) const { return values_.contains(name); }

  void SetNote(const std::string& key, nlohmann::json value) { notes_[key] = std::move(value); }
  const nlohmann::json& notes() const { return notes_; }

  nlohmann::json ToJson() const;
  static MetricReport FromJson(const nlohmann::json& doc);

  /// One row per metric: | metric | mean ± stderr | runs |.
  std::string ToMarkdown(const std::string& title) const;

  void Write(const std::filesystem::path& json_path, const std::filesystem::path& md_path,
             const std::string& title) const;

 private:
  std::map<std::string, std::vector<double>> values_;
  nlohmann::json notes_ = nlohmann::json::object();
};

}  // namespace cfcbm
