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

#ifndef FACTREE_CORE_MODEL_HPP_
#define FACTREE_CORE_MODEL_HPP_

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "core/config.hpp"
#include "core/dataset.hpp"
#include "core/factors.hpp"
#include "core/tree.hpp"
#include "json.hpp"

namespace factree {

inline constexpr int kModelVersion = 2;

struct ConvergenceReport {
  double initial_objective = 0.0;  // plain MF (U0, V0)
  std::vector<double> objectives;  // one per alternation
  std::string stop_reason;         // "tolerance" or "max_alternations"
  // Wall-clock seconds per phase; kept out of the model file so saved
  // models stay byte-identical across runs.
  std::vector<std::pair<std::string, double>> phase_seconds;
};

struct FactModel {
  TrainConfig config;
  std::vector<std::string> vocab;
  std::vector<std::string> users;
  std::vector<std::string> items;
  DiscretizationSpec spec;
  FactorTree user_tree;
  FactorTree item_tree;
  std::optional<FactorMatrix> personal_user;
  std::optional<FactorMatrix> personal_item;
  std::vector<std::vector<int>> user_seen;  // training items per user
  ConvergenceReport report;
  // Set by load_model when an older file was upgraded.
  std::string migration_note;

  // Derived by finalize(): leaf per entity and final factors (leaf
  // accumulated + personal residual).
  std::vector<int> user_leaf;
  std::vector<int> item_leaf;
  FactorMatrix user_factors;
  FactorMatrix item_factors;

  const Hyperparams& hp() const { return config.hp; }
  int dim() const { return config.hp.dim; }
  int num_users() const { return static_cast<int>(users.size()); }
  int num_items() const { return static_cast<int>(items.size()); }
  std::optional<int> user_index(const std::string& id) const;
  std::optional<int> item_index(const std::string& id) const;
  std::optional<int> feature_index(const std::string& name) const;

  void finalize();
};

// Plain MF on free per-entity vectors; returns V.
FactorMatrix init_item_factors(const TrainingData& data, const Hyperparams& hp);
FactorMatrix init_item_factors(const Dataset& ds, const Hyperparams& hp);

FactModel alternate(const Dataset& ds, const TrainConfig& cfg);

// Training objective of the model's final factors on `ds` (same pair
// sampling as training).
double model_objective(const FactModel& model, const Dataset& ds);

nlohmann::json model_to_json(const FactModel& model);
FactModel model_from_json(nlohmann::json j);
std::string serialize_model(const FactModel& model);
FactModel deserialize_model(const std::string& text);
void save_model(const FactModel& model, const std::filesystem::path& path);
FactModel load_model(const std::filesystem::path& path);

std::string base64_encode(const std::vector<double>& values);
std::vector<double> base64_decode(const std::string& text);

}  // namespace factree

#endif  // FACTREE_CORE_MODEL_HPP_
