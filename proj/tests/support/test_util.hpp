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

#ifndef FACTREE_TESTS_SUPPORT_TEST_UTIL_HPP_
#define FACTREE_TESTS_SUPPORT_TEST_UTIL_HPP_

#include <filesystem>
#include <random>
#include <sstream>
#include <string>

#include "core/config.hpp"
#include "core/dataset.hpp"
#include "core/eval.hpp"
#include "core/model.hpp"

namespace factree::testing {

inline Dataset parse_text(const std::string& jsonl,
                          const ParseOptions& options = {}) {
  std::istringstream in(jsonl);
  return parse_dataset(in, options);
}

// Small config for fast tests.
inline TrainConfig small_config(int depth = 3, int dim = 2,
                                std::uint64_t seed = 1) {
  TrainConfig cfg;
  cfg.depth = depth;
  cfg.max_alternations = 2;
  cfg.hp.dim = dim;
  cfg.hp.seed = seed;
  cfg.hp.epochs = 15;
  cfg.hp.mf_rounds = 3;
  cfg.hp.personal_epochs = 40;
  cfg.hp.lambda_u = cfg.hp.lambda_v = 0.3;
  return cfg;
}

inline Dataset small_planted(std::uint64_t seed = 1, int users = 40,
                             int items = 30, int reviews_per_user = 6) {
  SyntheticSpec spec;
  spec.users = users;
  spec.items = items;
  spec.reviews_per_user = reviews_per_user;
  spec.seed = seed;
  return synth_generate(spec).dataset;
}

// Fresh per-test scratch directory.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() /
                   ("factree_test_" + name + "_" +
                    std::to_string(std::random_device{}()));
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace factree::testing

#endif  // FACTREE_TESTS_SUPPORT_TEST_UTIL_HPP_
