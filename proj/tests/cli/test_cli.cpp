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
#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#ifndef FACT_BINARY
#error "FACT_BINARY must be defined"
#endif

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Run {
  int code;
  std::string out;
};

// Runs the CLI with stdout captured; stderr is discarded.
Run fact(const std::string& args, const std::string& stdin_text = "") {
  std::string cmd = std::string(FACT_BINARY) + " " + args + " 2>/dev/null";
  if (!stdin_text.empty()) cmd = "printf '" + stdin_text + "' | " + cmd;
  FILE* pipe = popen(cmd.c_str(), "r");
  Run r{-1, {}};
  if (pipe == nullptr) return r;
  std::array<char, 4096> buf;
  std::size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() /
           ("factree_cli_" + std::to_string(std::random_device{}()));
    fs::create_directories(dir_);
    data_ = (dir_ / "data.jsonl").string();
    model_ = (dir_ / "m.json").string();
    ASSERT_EQ(fact("synth --out " + data_ +
                   " --set users=30 --set items=20 --set reviews_per_user=6 --seed 3")
                  .code,
              0);
    ASSERT_EQ(fact(train_args(model_)).code, 0);
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }

  static std::string train_args(const std::string& out) {
    return "train --data " + data_ + " --out " + out +
           " --depth 3 --dim 2 --seed 4 --set hp.epochs=10 --set hp.mf_rounds=3"
           " --set hp.personal_epochs=20 --set max_alternations=1";
  }

  static inline fs::path dir_;
  static inline std::string data_;
  static inline std::string model_;
};

TEST_F(CliTest, TrainIsDeterministicAndWritesSidecars) {
  const std::string again = (dir_ / "again.json").string();
  ASSERT_EQ(fact(train_args(again)).code, 0);
  EXPECT_EQ(slurp(model_), slurp(again));
  EXPECT_TRUE(fs::exists(dir_ / "m.config.json"));
  const json timings = json::parse(slurp(dir_ / "m.timings.json"));
  EXPECT_TRUE(timings.contains("total_seconds"));
}

TEST_F(CliTest, EvaluateCsvColumns) {
  const auto r = fact("evaluate --data " + data_ +
                      " --method most-popular --folds 3 --k 10,50");
  ASSERT_EQ(r.code, 0);
  std::istringstream in(r.out);
  std::string header, row, extra;
  std::getline(in, header);
  std::getline(in, row);
  EXPECT_EQ(header, "ndcg@10,ndcg@50");
  EXPECT_EQ(std::count(row.begin(), row.end(), ','), 1);
  EXPECT_FALSE(std::getline(in, extra) && !extra.empty());
}

TEST_F(CliTest, ColdStartCsv) {
  const auto r = fact("evaluate --data " + data_ +
                      " --cold-start --depth 2 --dim 2 --seed 4 --set hp.epochs=10"
                      " --set hp.mf_rounds=3 --set max_alternations=1");
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.out.rfind("k,ndcg@50,users,skipped\n", 0), 0u);
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 7);
}

TEST_F(CliTest, RecommendAndExplainJson) {
  auto r = fact("recommend --model " + model_ + " --user u00 --k 4 --json");
  ASSERT_EQ(r.code, 0);
  const json rec = json::parse(r.out);
  ASSERT_EQ(rec["items"].size(), 4u);
  r = fact("explain --model " + model_ + " --user u00 --item i05 --json");
  ASSERT_EQ(r.code, 0);
  const json ex = json::parse(r.out);
  for (const auto& f : ex["features"]) {
    EXPECT_NE(ex["text"].get<std::string>().find(f.get<std::string>()),
              std::string::npos);
  }
  r = fact("explain --model " + model_ + " --user u00 --item i05");
  EXPECT_EQ(r.out, ex["text"].get<std::string>() + "\n");
}

TEST_F(CliTest, InterviewScriptedAndStdin) {
  const auto scripted =
      fact("interview --model " + model_ + " --answers like,like,like --k 3 --json");
  const auto piped =
      fact("interview --model " + model_ + " --k 3 --json", "like\\nlike\\nlike\\n");
  ASSERT_EQ(piped.code, 0);
  const json p = json::parse(piped.out);
  EXPECT_EQ(p["session"]["status"], "finished");
  EXPECT_EQ(p["recommendations"]["items"].size(), 3u);
  // Modifier wording is seeded by the session id, so compare ranked items only.
  auto ranked = [](const json& j) {
    std::vector<std::pair<std::string, double>> out;
    for (const auto& r : j["recommendations"]["items"]) out.emplace_back(r["item"], r["score"]);
    return out;
  };
  // A script longer than the tree has answers left over.
  if (scripted.code == 0) {
    EXPECT_EQ(ranked(json::parse(scripted.out)), ranked(p));
  } else {
    EXPECT_EQ(scripted.code, 1);
  }
}

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(fact("train --bogus-flag").code, 1);
  EXPECT_EQ(fact("frobnicate").code, 1);
  EXPECT_EQ(fact("recommend --model " + model_ + " --user nobody").code, 1);
  EXPECT_EQ(fact("recommend --model " + (dir_ / "missing.json").string() +
                 " --user u00")
                .code,
            2);
  std::ofstream(dir_ / "broken.json") << slurp(model_).substr(0, 100);
  EXPECT_EQ(fact("recommend --model " + (dir_ / "broken.json").string() +
                 " --user u00")
                .code,
            2);
  EXPECT_EQ(fact("train --data " + data_ + " --out " + (dir_ / "x.json").string() +
                 " --set depth=0")
                .code,
            1);
}

}  // namespace
