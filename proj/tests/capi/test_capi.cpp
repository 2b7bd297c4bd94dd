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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <memory>
#include <random>
#include <string>

#include "factree/factree.h"
#include "httplib.h"
#include "json.hpp"

using nlohmann::json;

namespace {

struct Freer {
  void operator()(fact_dataset* p) const { fact_dataset_free(p); }
  void operator()(fact_config* p) const { fact_config_free(p); }
  void operator()(fact_model* p) const { fact_model_free(p); }
  void operator()(fact_session* p) const { fact_session_free(p); }
  void operator()(fact_server* p) const { fact_server_free(p); }
};
template <typename T>
using Owned = std::unique_ptr<T, Freer>;

json take_json(char* s) {
  json j = json::parse(s);
  fact_string_free(s);
  return j;
}

const char* kSpec = R"({"users":30,"items":20,"reviews_per_user":6,"seed":2})";

struct Trained {
  Owned<fact_dataset> ds;
  Owned<fact_config> cfg;
  Owned<fact_model> model;
};

Trained train_small() {
  Trained t;
  fact_dataset* ds = nullptr;
  EXPECT_EQ(fact_synth(kSpec, &ds), FACT_OK) << fact_last_error();
  t.ds.reset(ds);
  fact_config* cfg = nullptr;
  EXPECT_EQ(fact_config_new(&cfg), FACT_OK);
  t.cfg.reset(cfg);
  for (const char* a : {"depth=3", "hp.dim=2", "hp.epochs=10", "hp.mf_rounds=3",
                        "hp.personal_epochs=20", "max_alternations=1"}) {
    EXPECT_EQ(fact_config_set(cfg, a), FACT_OK) << a;
  }
  fact_model* model = nullptr;
  EXPECT_EQ(fact_train(ds, cfg, &model), FACT_OK) << fact_last_error();
  t.model.reset(model);
  return t;
}

TEST(CApi, VersionAndStatusNames) {
  EXPECT_STRNE(fact_version(), "");
  EXPECT_STREQ(fact_status_name(FACT_OK), "ok");
  EXPECT_STREQ(fact_status_name(FACT_ERR_NOT_FOUND), "not_found");
  EXPECT_EQ(fact_set_log_level("error"), FACT_OK);
  EXPECT_EQ(fact_set_log_level("loud"), FACT_ERR_VALIDATION);
}

TEST(CApi, ErrorsCarryMessages) {
  fact_dataset* ds = nullptr;
  EXPECT_EQ(fact_dataset_load("/nonexistent/file.jsonl", nullptr, &ds), FACT_ERR_IO);
  EXPECT_EQ(ds, nullptr);
  EXPECT_NE(std::string(fact_last_error()).find("nonexistent"), std::string::npos);
  EXPECT_EQ(fact_synth(R"({"bogus":1})", &ds), FACT_ERR_VALIDATION);
  EXPECT_EQ(fact_synth("{", &ds), FACT_ERR_VALIDATION);
  fact_config* cfg = nullptr;
  ASSERT_EQ(fact_config_new(&cfg), FACT_OK);
  Owned<fact_config> owned(cfg);
  EXPECT_EQ(fact_config_set(cfg, "depth=0"), FACT_ERR_VALIDATION);
  char* text = nullptr;
  ASSERT_EQ(fact_config_to_json(cfg, &text), FACT_OK);
  EXPECT_EQ(take_json(text)["depth"], 6);
  fact_model* model = nullptr;
  EXPECT_EQ(fact_model_load("/nonexistent/model.json", &model), FACT_ERR_IO);
}

TEST(CApi, TrainRecommendExplainSession) {
  auto t = train_small();
  ASSERT_TRUE(t.model);
  char* out = nullptr;
  ASSERT_EQ(fact_model_info(t.model.get(), &out), FACT_OK);
  const json info = take_json(out);
  EXPECT_EQ(info["users"], 30);
  EXPECT_EQ(info["dim"], 2);
  EXPECT_LE(info["user_tree"]["levels"].get<int>(), 3);

  ASSERT_EQ(fact_model_timings(t.model.get(), &out), FACT_OK);
  EXPECT_GE(take_json(out)["total_seconds"].get<double>(), 0.0);

  double score = 0;
  EXPECT_EQ(fact_predict(t.model.get(), "u00", "i00", &score), FACT_OK);
  EXPECT_EQ(fact_predict(t.model.get(), "nobody", "i00", &score), FACT_ERR_NOT_FOUND);

  ASSERT_EQ(fact_recommend(t.model.get(), "u00", 5, 1, &out), FACT_OK);
  const json rec = take_json(out);
  ASSERT_EQ(rec["items"].size(), 5u);
  EXPECT_EQ(fact_recommend(t.model.get(), "u00", 0, 1, &out), FACT_ERR_VALIDATION);

  ASSERT_EQ(fact_recommend_profile(t.model.get(), R"({"f0": 3})", 3, &out), FACT_OK);
  EXPECT_EQ(take_json(out)["items"].size(), 3u);
  EXPECT_EQ(fact_recommend_profile(t.model.get(), R"({"nope": 3})", 3, &out),
            FACT_ERR_VALIDATION);

  ASSERT_EQ(fact_explain(t.model.get(), "u00", "i03", nullptr, &out), FACT_OK);
  const json ex = take_json(out);
  EXPECT_TRUE(ex.contains("text"));
  EXPECT_TRUE(ex.contains("user_path"));

  fact_session* s = nullptr;
  ASSERT_EQ(fact_session_start(t.model.get(), &s), FACT_OK);
  Owned<fact_session> session(s);
  EXPECT_EQ(fact_session_recommend(s, 3, &out), FACT_ERR_STATE);
  EXPECT_EQ(fact_session_answer(s, "perhaps"), FACT_ERR_VALIDATION);
  for (int guard = 0; guard < 10; ++guard) {
    ASSERT_EQ(fact_session_state(s, &out), FACT_OK);
    if (take_json(out)["status"] == "finished") break;
    ASSERT_EQ(fact_session_answer(s, "like"), FACT_OK);
  }
  EXPECT_EQ(fact_session_answer(s, "like"), FACT_ERR_STATE);
  ASSERT_EQ(fact_session_recommend(s, 3, &out), FACT_OK);
  EXPECT_EQ(take_json(out)["items"].size(), 3u);
}

TEST(CApi, SaveLoadIsByteIdentical) {
  auto t = train_small();
  const auto dir = std::filesystem::temp_directory_path() /
                   ("factree_capi_" + std::to_string(std::random_device{}()));
  std::filesystem::create_directories(dir);
  const auto a = (dir / "a.json").string(), b = (dir / "b.json").string();
  ASSERT_EQ(fact_model_save(t.model.get(), a.c_str()), FACT_OK);
  fact_model* loaded = nullptr;
  ASSERT_EQ(fact_model_load(a.c_str(), &loaded), FACT_OK);
  Owned<fact_model> owned(loaded);
  ASSERT_EQ(fact_model_save(loaded, b.c_str()), FACT_OK);
  auto slurp = [](const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  EXPECT_EQ(slurp(a), slurp(b));
  double x = 0, y = 0;
  fact_predict(t.model.get(), "u03", "i07", &x);
  fact_predict(loaded, "u03", "i07", &y);
  EXPECT_EQ(x, y);
  std::filesystem::remove_all(dir);
}

TEST(CApi, DatasetOperations) {
  fact_dataset* ds = nullptr;
  ASSERT_EQ(fact_synth(kSpec, &ds), FACT_OK);
  Owned<fact_dataset> owned(ds);
  char* out = nullptr;
  ASSERT_EQ(fact_dataset_summary(ds, &out), FACT_OK);
  const json sum = take_json(out);
  EXPECT_EQ(sum["users"], 30);
  fact_dataset* filtered = nullptr;
  ASSERT_EQ(fact_dataset_filter(ds, R"({"min_reviews_per_item": 2})", &filtered),
            FACT_OK);
  fact_dataset_free(filtered);
  EXPECT_EQ(fact_dataset_filter(ds, R"({"min_reviews_per_user": 1000})", &filtered),
            FACT_ERR_EMPTY_DATASET);
  EXPECT_EQ(fact_dataset_filter(ds, R"({"min_review": 1})", &filtered),
            FACT_ERR_VALIDATION);
  fact_dataset* small = nullptr;
  ASSERT_EQ(fact_dataset_truncate_features(ds, 2, &small), FACT_OK);
  ASSERT_EQ(fact_dataset_summary(small, &out), FACT_OK);
  EXPECT_EQ(take_json(out)["features"], 2);
  fact_dataset_free(small);
}

TEST(CApi, EvaluationEntryPoints) {
  auto t = train_small();
  char* out = nullptr;
  ASSERT_EQ(fact_cross_validate(t.ds.get(), t.cfg.get(),
                                R"({"method":"most-popular","folds":3,"ks":[5]})", &out),
            FACT_OK);
  const json cv = take_json(out);
  EXPECT_EQ(cv["folds"].size(), 3u);
  EXPECT_TRUE(cv["metrics"].contains("ndcg@5"));

  ASSERT_EQ(fact_evaluate(t.model.get(), t.ds.get(), R"({"ks":[5]})", &out), FACT_OK);
  EXPECT_TRUE(take_json(out).is_object());

  char* csv = nullptr;
  ASSERT_EQ(fact_sweep(t.ds.get(), t.cfg.get(),
                       R"({"axis":"depth","values":[1],"folds":3,"max_folds":1,"ks":[5]})",
                       &out, &csv),
            FACT_OK);
  EXPECT_EQ(take_json(out)["axis"], "depth");
  EXPECT_EQ(std::string(csv).rfind("axis,value,metric,mean,std,folds\n", 0), 0u);
  fact_string_free(csv);
  EXPECT_EQ(fact_sweep(t.ds.get(), t.cfg.get(), R"({"axis":"width","values":[1]})",
                       &out, nullptr),
            FACT_ERR_VALIDATION);
}

TEST(CApi, ServerLifecycle) {
  auto t = train_small();
  fact_server* srv = nullptr;
  ASSERT_EQ(fact_server_start(t.model.get(), R"({"port":0,"threads":2})", &srv),
            FACT_OK)
      << fact_last_error();
  Owned<fact_server> owned(srv);
  const int port = fact_server_port(srv);
  ASSERT_GT(port, 0);
  httplib::Client client("127.0.0.1", port);
  auto res = client.Get("/api/health");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(json::parse(res->body)["model"]["users"], 30);
  EXPECT_EQ(fact_server_stop(srv), FACT_OK);
  EXPECT_EQ(fact_server_start(t.model.get(), R"({"port":-5})", &srv),
            FACT_ERR_VALIDATION);
}

}  // namespace
