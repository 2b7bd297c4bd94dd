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

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "core/config.hpp"
#include "core/error.hpp"
#include "support/test_util.hpp"

namespace factree {
namespace {

TEST(Config, DefaultsValidate) {
  TrainConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  EXPECT_EQ(cfg.depth, 6);
  EXPECT_TRUE(cfg.use_parent_factors);
}

TEST(Config, JsonRoundTrip) {
  TrainConfig cfg = testing::small_config(4, 3, 9);
  cfg.use_parent_factors = false;
  cfg.normalization = NormalizationMode::kNone;
  const TrainConfig back = config_from_json(config_to_json(cfg));
  EXPECT_EQ(config_to_json(back), config_to_json(cfg));
  EXPECT_EQ(back.hp.seed, 9u);
  EXPECT_FALSE(back.use_parent_factors);
}

TEST(Config, InfiniteToleranceRoundTrips) {
  TrainConfig cfg;
  cfg.alt_tol = std::numeric_limits<double>::infinity();
  const auto j = config_to_json(cfg);
  EXPECT_EQ(j["alt_tol"], "inf");
  EXPECT_TRUE(std::isinf(config_from_json(j).alt_tol));
}

TEST(Config, TomlAndJsonAgree) {
  const auto toml = parse_config_text(R"(
depth = 4
use_parent_factors = false
[hp]
dim = 8
lambda_b = 0.25
)",
                                      true);
  const auto json = parse_config_text(
      R"({"depth":4,"use_parent_factors":false,"hp":{"dim":8,"lambda_b":0.25}})",
      false);
  EXPECT_EQ(config_to_json(toml), config_to_json(json));
  EXPECT_EQ(toml.hp.dim, 8);
  EXPECT_EQ(toml.hp.lambda_u, Hyperparams{}.lambda_u);
}

TEST(Config, UnknownKeysRejected) {
  EXPECT_THROW(parse_config_text(R"({"depht":3})", false), ValidationError);
  EXPECT_THROW(parse_config_text(R"({"hp":{"dimm":3}})", false), ValidationError);
  EXPECT_THROW(parse_config_text("depht = 3\n", true), ValidationError);
}

TEST(Config, BadValuesRejected) {
  EXPECT_THROW(parse_config_text(R"({"depth":"deep"})", false), ValidationError);
  EXPECT_THROW(parse_config_text("not json", false), ValidationError);
  EXPECT_THROW(parse_config_text("depth = = 3", true), ValidationError);
  TrainConfig cfg;
  cfg.depth = 0;
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg = {};
  cfg.alt_tol = 0.0;
  EXPECT_THROW(cfg.validate(), ValidationError);
}

TEST(Config, Overrides) {
  TrainConfig cfg;
  apply_override(cfg, "depth=3");
  apply_override(cfg, "hp.dim=5");
  apply_override(cfg, "hp.lambda_b=0.5");
  apply_override(cfg, "normalization=none");
  apply_override(cfg, "alt_tol=inf");
  EXPECT_EQ(cfg.depth, 3);
  EXPECT_EQ(cfg.hp.dim, 5);
  EXPECT_DOUBLE_EQ(cfg.hp.lambda_b, 0.5);
  EXPECT_EQ(cfg.normalization, NormalizationMode::kNone);
  EXPECT_TRUE(std::isinf(cfg.alt_tol));
  EXPECT_THROW(apply_override(cfg, "nope=1"), ValidationError);
  EXPECT_THROW(apply_override(cfg, "hp.nope=1"), ValidationError);
  EXPECT_THROW(apply_override(cfg, "hp=1"), ValidationError);
  EXPECT_THROW(apply_override(cfg, "depth"), ValidationError);
}

TEST(Config, LoadFromFileByExtension) {
  const auto dir = testing::scratch_dir("config");
  std::ofstream(dir / "a.toml") << "depth = 2\n";
  std::ofstream(dir / "a.json") << R"({"depth": 5})";
  std::ofstream(dir / "a.cfg") << "depth = 7\n";
  EXPECT_EQ(load_config(dir / "a.toml").depth, 2);
  EXPECT_EQ(load_config(dir / "a.json").depth, 5);
  EXPECT_EQ(load_config(dir / "a.cfg").depth, 7);
  try {
    load_config(dir / "missing.toml");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIo);
  }
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace factree
