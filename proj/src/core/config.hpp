// Copyright 2026 The factree Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FACTREE_CORE_CONFIG_HPP_
#define FACTREE_CORE_CONFIG_HPP_

#include <filesystem>
#include <string>

#include "core/dataset.hpp"
#include "core/factors.hpp"
#include "json.hpp"

namespace factree {

struct TrainConfig {
  int depth = 6;  // maximum node levels of each tree
  int max_alternations = 3;
  double alt_tol = 1e-3;
  bool use_parent_factors = true;
  bool use_personal_residuals = true;
  int min_node_size = 1;
  int bins = 10;
  NormalizationMode normalization = NormalizationMode::kPerEntityTotal;
  int threads = 1;
  Hyperparams hp;

  void validate() const;
};

nlohmann::json config_to_json(const TrainConfig& cfg);
nlohmann::json hyperparams_to_json(const Hyperparams& hp);
// Keys missing from `j` keep their defaults; unknown keys are rejected.
TrainConfig config_from_json(const nlohmann::json& j);
Hyperparams hyperparams_from_json(const nlohmann::json& j);

// Reads a .toml or .json file (chosen by extension; anything else is tried
// as JSON first, then TOML).
TrainConfig load_config(const std::filesystem::path& path);
TrainConfig parse_config_text(const std::string& text, bool toml);

// Applies "key=value" where key is a config field or "hp.<field>". The value
// is parsed as JSON when possible and taken as a string otherwise.
void apply_override(TrainConfig& cfg, const std::string& assignment);

}  // namespace factree

#endif  // FACTREE_CORE_CONFIG_HPP_
