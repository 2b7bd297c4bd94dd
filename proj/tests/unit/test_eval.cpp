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
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "core/error.hpp"
#include "core/eval.hpp"
#include "support/test_util.hpp"

namespace factree {
namespace {

double direct_ndcg(const std::vector<int>& ranked,
                   const std::map<int, double>& rel, int k) {
  double dcg = 0, idcg = 0;
  for (int r = 0; r < k && r < static_cast<int>(ranked.size()); ++r) {
    if (rel.count(ranked[r])) dcg += rel.at(ranked[r]) / std::log2(r + 2.0);
  }
  std::vector<double> g;
  for (const auto& [_, v] : rel) g.push_back(v);
  std::sort(g.rbegin(), g.rend());
  for (int r = 0; r < k && r < static_cast<int>(g.size()); ++r) {
    idcg += g[r] / std::log2(r + 2.0);
  }
  return idcg > 0 ? dcg / idcg : 0;
}

TEST(Ndcg, Examples) {
  const std::map<int, double> rel{{7, 1.0}};
  const std::vector<int> first{7, 1, 2}, second{1, 7, 2}, missing{1, 2, 3};
  EXPECT_DOUBLE_EQ(ndcg_at_k(first, rel, 3), 1.0);
  EXPECT_DOUBLE_EQ(ndcg_at_k(second, rel, 3), 1.0 / std::log2(3.0));
  EXPECT_DOUBLE_EQ(ndcg_at_k(missing, rel, 3), 0.0);
  EXPECT_DOUBLE_EQ(ndcg_at_k(second, rel, 1), 0.0);
  EXPECT_THROW(ndcg_at_k(first, rel, 0), ValidationError);
  EXPECT_THROW(ndcg_at_k(first, {}, 3), ValidationError);
  const std::map<int, double> zero{{1, 0.0}};
  EXPECT_EQ(ndcg_at_k(first, zero, 3), 0.0);
}

TEST(Ndcg, MatchesDirectFormulaAndBounds) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 300; ++t) {
    std::vector<int> ranked(20);
    std::iota(ranked.begin(), ranked.end(), 0);
    std::shuffle(ranked.begin(), ranked.end(), rng);
    ranked.resize(1 + rng() % 20);
    std::map<int, double> rel;
    const int n = 1 + static_cast<int>(rng() % 6);
    for (int i = 0; i < n; ++i) rel[static_cast<int>(rng() % 25)] = 1 + rng() % 5;
    const int k = 1 + static_cast<int>(rng() % 25);
    const double got = ndcg_at_k(ranked, rel, k);
    EXPECT_NEAR(got, direct_ndcg(ranked, rel, k), 1e-12);
    EXPECT_GE(got, 0.0);
    EXPECT_LE(got, 1.0 + 1e-12);
  }
}

TEST(Ndcg, IdealOrderingScoresOne) {
  const std::map<int, double> rel{{3, 5}, {1, 2}, {9, 4}};
  const std::vector<int> ideal{3, 9, 1, 0};
  EXPECT_EQ(ndcg_at_k(ideal, rel, 2), 1.0);
  EXPECT_EQ(ndcg_at_k(ideal, rel, 10), 1.0);
}

TEST(Folds, DisjointCoveringDeterministic) {
  const Dataset ds = testing::small_planted(1, 30, 20, 6);
  const auto a = assign_folds(ds, 5, 3);
  const auto b = assign_folds(ds, 5, 3);
  EXPECT_EQ(a.fold, b.fold);
  EXPECT_EQ(a.train_only_users, 0);
  std::map<int, std::map<int, int>> per_user;
  for (std::size_t r = 0; r < ds.reviews.size(); ++r) {
    ASSERT_GE(a.fold[r], 0);
    ASSERT_LT(a.fold[r], 5);
    ++per_user[ds.reviews[r].user][a.fold[r]];
  }
  // Every user appears in every fold (6 reviews over 5 folds).
  for (const auto& [_, folds] : per_user) EXPECT_EQ(folds.size(), 5u);
  EXPECT_NE(assign_folds(ds, 5, 4).fold, a.fold);
}

TEST(Folds, SparseUsersStayInTraining) {
  const Dataset ds = testing::small_planted(1, 10, 20, 3);
  const auto a = assign_folds(ds, 5, 1);
  EXPECT_EQ(a.train_only_users, 10);
  for (int f : a.fold) EXPECT_EQ(f, -1);
  EXPECT_THROW(assign_folds(ds, 1, 1), ValidationError);
}

TEST(MostPopular, OrdersByCountThenId) {
  const Dataset ds = testing::parse_text(
      R"({"user":"a","item":"x","rating":3,"ts":1,"mentions":[]}
{"user":"b","item":"y","rating":3,"ts":1,"mentions":[]}
{"user":"c","item":"y","rating":3,"ts":1,"mentions":[]}
{"user":"a","item":"z","rating":3,"ts":2,"mentions":[]}
)");
  const auto r = baseline_most_popular(ds);
  EXPECT_EQ(r->rank(0, 3, {}), (std::vector<int>{1, 0, 2}));
  const std::vector<int> exclude{1};
  EXPECT_EQ(r->rank(0, 3, exclude), (std::vector<int>{0, 2}));
  EXPECT_FALSE(r->training_objective());
}

TEST(FlatMf, BprVariantNeedsWeight) {
  const Dataset ds = testing::small_planted(2);
  Hyperparams hp;
  hp.dim = 2;
  hp.epochs = 5;
  hp.mf_rounds = 2;
  hp.lambda_b = 0.0;
  EXPECT_THROW(baseline_flat_mf(ds, hp, true), ValidationError);
  const auto plain = baseline_flat_mf(ds, hp, false);
  EXPECT_TRUE(plain->training_objective());
  EXPECT_EQ(parse_method("bpr-mf"), Method::kBprMf);
  EXPECT_STREQ(method_name(Method::kMostPopular), "most-popular");
  EXPECT_THROW(parse_method("svd"), ValidationError);
}

TEST(EvaluateRanker, HeldOutOnlyAndSeenExcluded) {
  const Dataset ds = testing::small_planted(3, 20, 15, 6);
  std::vector<Review> train, test;
  for (const auto& r : ds.reviews) (r.ts == 6 ? test : train).push_back(r);
  const Dataset tr = ds.with_reviews(train);
  const auto pop = baseline_most_popular(tr);
  EvalOptions opt;
  opt.ks = {5, 15};
  const auto score = evaluate_ranker(*pop, tr, test, opt);
  EXPECT_EQ(score.users, 20);
  ASSERT_EQ(score.ndcg.size(), 2u);
  EXPECT_LE(score.ndcg[0], score.ndcg[1] + 1e-12);
  for (double v : score.ndcg) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(CrossValidate, ReportShape) {
  const Dataset ds = testing::small_planted(4, 30, 20, 6);
  EvalOptions opt;
  opt.ks = {10};
  const auto rep = cross_validate(ds, testing::small_config(2), Method::kFact, 3,
                                  opt, 2);
  EXPECT_EQ(rep.folds.size(), 2u);
  EXPECT_EQ(rep.mean.size(), 1u);
  EXPECT_TRUE(rep.objective);
  const auto j = cv_report_json(rep);
  EXPECT_EQ(j["method"], "fact");
  EXPECT_TRUE(j["metrics"].contains("ndcg@10"));
}

TEST(ColdStart, CohortAndSkips) {
  const Dataset ds = testing::small_planted(5, 60, 20, 5);
  ColdStartOptions opt;
  opt.k_values = {0, 2, 5};
  opt.test_fraction = 0.1;
  opt.cutoff = 10;
  const auto rep = cold_start_eval(ds, testing::small_config(2), opt);
  EXPECT_EQ(rep.test_users, 6);
  ASSERT_EQ(rep.ndcg.size(), 3u);
  // Five reviews per user leave no target after the first five.
  for (int k = 0; k < 3; ++k) {
    EXPECT_FALSE(rep.ndcg[k]);
    EXPECT_EQ(rep.skipped[k], 6);
  }
  EXPECT_TRUE(cold_start_json(rep)["points"][2]["ndcg"].is_null());

  opt.k_values = {0, 2};
  const auto short_rep = cold_start_eval(ds, testing::small_config(2), opt);
  EXPECT_TRUE(short_rep.ndcg[0] && short_rep.ndcg[1]);
  EXPECT_EQ(short_rep.users[0], short_rep.users[1]);
  EXPECT_EQ(short_rep.users[0], 6);
}

TEST(Phi, LambdaRoundTrip) {
  Hyperparams hp;
  hp.n_bpr = 0;
  hp.epochs = 4;
  const double lb = lambda_b_for_phi(hp, 0.25, 10, 20, 800);
  Hyperparams check = hp;
  check.lambda_b = lb;
  check.n_bpr = 800;
  EXPECT_NEAR(relative_bpr_weight(check, 10, 20), 0.25, 1e-12);
  EXPECT_EQ(lambda_b_for_phi(hp, 0.0, 10, 20, 800), 0.0);
  EXPECT_THROW(lambda_b_for_phi(hp, -1, 10, 20, 800), ValidationError);
  EXPECT_THROW(lambda_b_for_phi(hp, 1, 10, 20, 0), ValidationError);
}

TEST(Sweep, ConfigsDifferOnlyOnAxis) {
  const Dataset ds = testing::small_planted(6);
  const TrainConfig base = testing::small_config();
  const auto j0 = config_to_json(base);
  auto diff_keys = [&](const TrainConfig& c) {
    std::set<std::string> keys;
    const auto j = config_to_json(c);
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (it.key() == "hp") {
        for (auto h = it->begin(); h != it->end(); ++h) {
          if (*h != j0["hp"][h.key()]) keys.insert("hp." + h.key());
        }
      } else if (*it != j0[it.key()]) {
        keys.insert(it.key());
      }
    }
    return keys;
  };
  using S = std::set<std::string>;
  EXPECT_EQ(diff_keys(sweep_config(base, SweepAxis::kDepth, 5, ds)), S{"depth"});
  EXPECT_EQ(diff_keys(sweep_config(base, SweepAxis::kLatentDim, 7, ds)), S{"hp.dim"});
  EXPECT_EQ(diff_keys(sweep_config(base, SweepAxis::kPhi, 0.5, ds)), S{"hp.lambda_b"});
  EXPECT_EQ(diff_keys(sweep_config(base, SweepAxis::kParentFactors, 0, ds)),
            S{"use_parent_factors"});
  EXPECT_TRUE(diff_keys(sweep_config(base, SweepAxis::kNFeatures, 2, ds)).empty());
  EXPECT_THROW(sweep_config(base, SweepAxis::kDepth, 2.5, ds), ValidationError);
  EXPECT_THROW(parse_axis("width"), ValidationError);
}

TEST(Sweep, FailingCellBecomesErrorRow) {
  const Dataset ds = testing::small_planted(7, 20, 15, 5);
  EvalOptions opt;
  opt.ks = {10};
  const auto rep = sweep(ds, testing::small_config(), SweepAxis::kDepth, {0, 2}, 3,
                         opt, 1);
  ASSERT_EQ(rep.cells.size(), 2u);
  EXPECT_FALSE(rep.cells[0].error.empty());
  EXPECT_TRUE(rep.cells[1].error.empty());
  const std::string csv = sweep_csv(rep);
  EXPECT_NE(csv.find("depth,0,error,nan,nan,0"), std::string::npos);
  EXPECT_NE(csv.find("depth,2,ndcg@10,"), std::string::npos);
  EXPECT_TRUE(sweep_json(rep)["cells"][0].contains("error"));
}

TEST(Synth, DeterministicAndNoiseless) {
  SyntheticSpec spec;
  spec.users = 20;
  spec.items = 10;
  spec.reviews_per_user = 4;
  EXPECT_EQ(synth_generate(spec).dataset, synth_generate(spec).dataset);
  spec.noise = 0.0;
  const auto s = synth_generate(spec);
  for (const auto& r : s.dataset.reviews) {
    const bool same = s.user_cluster[r.user] == s.item_cluster[r.item];
    EXPECT_DOUBLE_EQ(r.rating, same ? 4.5 : 1.5);
  }
  spec.seed = 2;
  EXPECT_NE(synth_generate(spec).dataset, s.dataset);
}

TEST(Synth, SpecJson) {
  const auto spec = synthetic_spec_from_json({{"users", 30}, {"scale", {0, 10}}});
  EXPECT_EQ(spec.users, 30);
  EXPECT_EQ(spec.scale.max, 10.0);
  EXPECT_THROW(synthetic_spec_from_json({{"userz", 3}}), ValidationError);
  EXPECT_THROW(synthetic_spec_from_json({{"users", 0}}), ValidationError);
  const auto back = synthetic_spec_from_json(synthetic_spec_to_json(spec));
  EXPECT_EQ(synthetic_spec_to_json(back), synthetic_spec_to_json(spec));
}

}  // namespace
}  // namespace factree
