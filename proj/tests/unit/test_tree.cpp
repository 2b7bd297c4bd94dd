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

#include <map>
#include <set>

#include "core/error.hpp"
#include "core/model.hpp"
#include "core/tree.hpp"
#include "support/oracle.hpp"
#include "support/test_util.hpp"

namespace factree {
namespace {

// Everything a user-side or item-side fit needs, owned in one place.
struct Fixture {
  Dataset ds;
  Hyperparams hp;
  TrainingData data;
  FlatFactors flat;
  ProfileSet user_profiles;
  ProfileSet item_profiles;
  DiscretizationSpec spec;

  Fixture(Dataset d, Hyperparams h) : ds(std::move(d)), hp(h) {
    data = TrainingData::build(ds, hp);
    flat = train_flat_mf(data.interactions, data.pairs, hp);
    user_profiles = normalize_profiles(build_user_profiles(ds),
                                       NormalizationMode::kPerEntityTotal);
    item_profiles = normalize_profiles(build_item_profiles(ds),
                                       NormalizationMode::kPerEntityTotal);
    spec = build_discretization(user_profiles, item_profiles,
                                ds.num_features(), 5,
                                NormalizationMode::kPerEntityTotal);
  }

  FitContext context(Side side, bool pf = true) const {
    FitContext ctx;
    ctx.side = side;
    ctx.data = &data;
    ctx.counterpart = side == Side::kUser ? &flat.items : &flat.users;
    ctx.same_side = side == Side::kUser ? &flat.users : &flat.items;
    ctx.hp = hp;
    ctx.use_parent_factors = pf;
    return ctx;
  }
  const ProfileSet& profiles(Side side) const {
    return side == Side::kUser ? user_profiles : item_profiles;
  }
};

Hyperparams small_hp(std::uint64_t seed = 1) {
  Hyperparams hp;
  hp.dim = 2;
  hp.epochs = 10;
  hp.mf_rounds = 3;
  hp.lambda_u = hp.lambda_v = 0.3;
  hp.personal_epochs = 20;
  hp.seed = seed;
  return hp;
}

std::vector<int> all_entities(int n) {
  std::vector<int> v(n);
  for (int i = 0; i < n; ++i) v[i] = i;
  return v;
}

TEST(Predicate, BoundaryAndUnknown) {
  FeatureProfile p(Side::kUser);
  p.set(0, 0.5);
  p.set(2, 0.0);
  EXPECT_EQ(evaluate_predicate(p, {0, 0.5}), Branch::kLeft);
  EXPECT_EQ(evaluate_predicate(p, {0, 0.6}), Branch::kRight);
  EXPECT_EQ(evaluate_predicate(p, {1, 0.0}), Branch::kUnknown);
  // A stored zero is known, not unknown.
  EXPECT_EQ(evaluate_predicate(p, {2, 0.0}), Branch::kLeft);
  EXPECT_STREQ(branch_name(Branch::kUnknown), "E");
}

TEST(Partition, DisjointCoverMatchesOracle) {
  const Fixture fx(testing::small_planted(3), small_hp());
  const auto members = all_entities(fx.ds.num_users());
  for (int f = 0; f < fx.ds.num_features(); ++f) {
    for (double t : fx.spec.user_thresholds[f]) {
      const auto got = partition(members, fx.user_profiles, {f, t});
      const auto want = oracle::split_members(members, fx.user_profiles, f, t);
      std::multiset<int> all;
      for (int g = 0; g < 3; ++g) {
        EXPECT_EQ(got.groups[g], want[g]);
        all.insert(got.groups[g].begin(), got.groups[g].end());
      }
      EXPECT_EQ(all, std::multiset<int>(members.begin(), members.end()));
    }
  }
}

TEST(Partition, DegenerateWhenOneGroup) {
  Partition p;
  p.groups[2] = {1, 2};
  EXPECT_TRUE(p.degenerate());
  p.groups[0] = {3};
  EXPECT_FALSE(p.degenerate());
}

TEST(EvaluateSplit, ZeroResidualStartMatchesUnsplitLoss) {
  const Fixture fx(testing::small_planted(4), small_hp());
  const auto ctx = fx.context(Side::kUser);
  const auto members = all_entities(fx.ds.num_users());
  const std::vector<double> parent{0.3, -0.2};
  const auto s =
      evaluate_split(ctx, members, fx.user_profiles, {0, fx.spec.user_thresholds[0][0]},
                     parent, 7);
  EXPECT_NEAR(s.initial_objective, shared_vector_loss(ctx, members, parent), 1e-9);
  EXPECT_LE(s.objective, s.initial_objective);
  for (int g = 0; g < 3; ++g) {
    for (int k = 0; k < 2; ++k) {
      EXPECT_DOUBLE_EQ(s.accumulated[g][k], parent[k] + s.residuals[g][k]);
    }
  }
}

TEST(EvaluateSplit, ObjectiveMatchesIndependentFormula) {
  for (Side side : {Side::kUser, Side::kItem}) {
    const Fixture fx(testing::small_planted(5), small_hp());
    const auto ctx = fx.context(side);
    const auto members = all_entities(ctx.num_entities());
    const auto& th = fx.spec.thresholds(side);
    int f = 0;
    while (th[f].empty()) ++f;
    const Predicate p{f, th[f].front()};
    const std::vector<double> parent{0.1, 0.2};
    const auto s = evaluate_split(ctx, members, fx.profiles(side), p, parent, 3);
    std::vector<int> group_of;
    std::vector<double> residuals;
    for (int g = 0; g < 3; ++g) {
      residuals.insert(residuals.end(), s.residuals[g].begin(), s.residuals[g].end());
    }
    for (int e : members) {
      group_of.push_back(static_cast<int>(evaluate_predicate(fx.profiles(side)[e], p)));
    }
    EXPECT_NEAR(s.objective,
                oracle::node_objective(ctx, members, group_of, parent, residuals),
                1e-8 * std::max(1.0, std::abs(s.objective)));
  }
}

TEST(EvaluateSplit, ApproachesExactMinimumWithoutPairs) {
  Hyperparams hp = small_hp();
  hp.lambda_b = 0.0;
  hp.mf_rounds = 5;
  hp.epochs = 60;
  const Fixture fx(testing::small_planted(6), hp);
  auto ctx = fx.context(Side::kUser);
  ctx.hp.lr = 0.002;
  ctx.hp.epochs = 3000;
  ctx.hp.tol = 0.0;
  const auto members = all_entities(fx.ds.num_users());
  const std::vector<double> parent{0.2, 0.4};
  int f = 0;
  while (fx.spec.user_thresholds[f].empty()) ++f;
  const Predicate p{f, fx.spec.user_thresholds[f].front()};
  const auto s = evaluate_split(ctx, members, fx.user_profiles, p, parent, 1);
  std::vector<int> group_of;
  std::vector<double> exact;
  for (int e : members) {
    group_of.push_back(static_cast<int>(evaluate_predicate(fx.user_profiles[e], p)));
  }
  for (int g = 0; g < 3; ++g) {
    const auto w = oracle::exact_user_residual(ctx, s.children.groups[g], parent);
    exact.insert(exact.end(), w.begin(), w.end());
  }
  const double best = oracle::node_objective(ctx, members, group_of, parent, exact);
  EXPECT_LE(best, s.objective + 1e-9);
  EXPECT_LE(s.objective - best, 1e-3 * best);
}

TEST(SelectPredicate, MatchesExhaustiveOracle) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    for (Side side : {Side::kUser, Side::kItem}) {
      const Fixture fx(testing::small_planted(seed, 30, 20, 5), small_hp(seed));
      const auto ctx = fx.context(side);
      const auto members = all_entities(ctx.num_entities());
      const std::vector<double> parent{0.05, -0.1};
      const auto got = select_predicate(ctx, members, fx.profiles(side),
                                        fx.spec.thresholds(side), parent, seed);
      const auto want = oracle::select(ctx, members, fx.profiles(side),
                                       fx.spec.thresholds(side), parent, seed);
      ASSERT_TRUE(got && want);
      EXPECT_EQ(got->predicate, want->predicate);
      EXPECT_NEAR(got->objective, want->objective, 1e-6);
    }
  }
}

TEST(SelectPredicate, ExcludedFeaturesAndNoCandidates) {
  const Fixture fx(testing::small_planted(2), small_hp());
  const auto ctx = fx.context(Side::kUser);
  const auto members = all_entities(fx.ds.num_users());
  const std::vector<double> parent{0, 0};
  SelectOptions opt;
  for (int f = 1; f < fx.ds.num_features(); ++f) opt.excluded_features.push_back(f);
  const auto got = select_predicate(ctx, members, fx.user_profiles,
                                    fx.spec.user_thresholds, parent, 1, opt);
  if (got) {
    EXPECT_EQ(got->predicate.feature, 0);
  }
  const auto want = oracle::select(ctx, members, fx.user_profiles,
                                   fx.spec.user_thresholds, parent, 1,
                                   {1, 2, 3, 4, 5});
  EXPECT_EQ(got.has_value(), want.has_value());

  for (int f = 0; f < fx.ds.num_features(); ++f) opt.excluded_features.push_back(f);
  EXPECT_FALSE(select_predicate(ctx, members, fx.user_profiles,
                                fx.spec.user_thresholds, parent, 1, opt));
  EXPECT_THROW(select_predicate(ctx, {}, fx.user_profiles, fx.spec.user_thresholds,
                                parent, 1),
               ValidationError);
}

TEST(SelectPredicate, ThreadCountDoesNotChangeResult) {
  const Fixture fx(testing::small_planted(7), small_hp());
  const auto ctx = fx.context(Side::kItem);
  const auto members = all_entities(ctx.num_entities());
  const std::vector<double> parent{0, 0};
  SelectOptions many;
  many.threads = 4;
  const auto a = select_predicate(ctx, members, fx.item_profiles,
                                  fx.spec.item_thresholds, parent, 9);
  const auto b = select_predicate(ctx, members, fx.item_profiles,
                                  fx.spec.item_thresholds, parent, 9, many);
  ASSERT_TRUE(a && b);
  EXPECT_EQ(a->predicate, b->predicate);
  EXPECT_EQ(a->objective, b->objective);
  EXPECT_EQ(a->residuals, b->residuals);
}

void check_tree_invariants(const FactorTree& tree, int entities, int max_depth,
                           bool pf) {
  EXPECT_LE(tree.levels(), max_depth);
  std::multiset<int> leaves;
  for (const auto& n : tree.nodes) {
    const auto path = tree.path_to(n.id);
    std::set<int> features;
    for (std::size_t k = 0; k + 1 < path.size(); ++k) {
      const auto& a = tree.node(path[k]);
      ASSERT_TRUE(a.predicate);
      EXPECT_TRUE(features.insert(a.predicate->feature).second);
    }
    if (n.is_leaf()) {
      leaves.insert(n.members.begin(), n.members.end());
      continue;
    }
    EXPECT_FALSE(features.contains(n.predicate->feature));
    std::vector<int> joined;
    for (int c : *n.children) {
      const auto& child = tree.node(c);
      EXPECT_EQ(child.parent, n.id);
      EXPECT_EQ(child.depth, n.depth + 1);
      joined.insert(joined.end(), child.members.begin(), child.members.end());
      for (std::size_t k = 0; k < n.accumulated.size(); ++k) {
        EXPECT_NEAR(child.accumulated[k], n.accumulated[k] + child.residual[k], 1e-12);
      }
    }
    std::sort(joined.begin(), joined.end());
    EXPECT_EQ(joined, n.members);
    if (pf) {
      EXPECT_LE(n.split_objective,
                n.unsplit_objective + 1e-9 * std::abs(n.unsplit_objective));
    }
  }
  EXPECT_EQ(leaves, [&] {
    std::multiset<int> all;
    for (int e = 0; e < entities; ++e) all.insert(e);
    return all;
  }());
}

TEST(Grow, StructuralInvariants) {
  for (bool pf : {true, false}) {
    for (Side side : {Side::kUser, Side::kItem}) {
      const Fixture fx(testing::small_planted(8), small_hp());
      const auto ctx = fx.context(side, pf);
      GrowOptions opt;
      opt.max_depth = 3;
      const auto tree = grow(ctx, fx.profiles(side), fx.spec.thresholds(side), opt, 5);
      check_tree_invariants(tree, ctx.num_entities(), 3, pf);
      EXPECT_GT(tree.nodes.size(), 1u);
    }
  }
}

TEST(Grow, DepthOneIsLoneRoot) {
  const Fixture fx(testing::small_planted(8), small_hp());
  GrowOptions opt;
  opt.max_depth = 1;
  const auto tree = grow(fx.context(Side::kUser), fx.user_profiles,
                         fx.spec.user_thresholds, opt, 5);
  EXPECT_EQ(tree.nodes.size(), 1u);
  EXPECT_EQ(tree.levels(), 1);
  opt.max_depth = 0;
  EXPECT_THROW(grow(fx.context(Side::kUser), fx.user_profiles,
                    fx.spec.user_thresholds, opt, 5),
               ValidationError);
}

TEST(Grow, IdenticalProfilesStayAtRoot) {
  std::string text;
  for (const char* u : {"a", "b", "c", "d"}) {
    for (const char* i : {"x", "y"}) {
      text += std::string(R"({"user":")") + u + R"(","item":")" + i +
              R"(","rating":4,"ts":1,"mentions":[{"feature":"f","polarity":1}]})" "\n";
    }
  }
  const Fixture fx(testing::parse_text(text), small_hp());
  GrowOptions opt;
  opt.max_depth = 4;
  const auto tree = grow(fx.context(Side::kUser), fx.user_profiles,
                         fx.spec.user_thresholds, opt, 1);
  EXPECT_EQ(tree.levels(), 1);
}

TEST(Grow, PlantedRootSplitSeparatesClusters) {
  SyntheticSpec spec;
  spec.users = 60;
  spec.items = 40;
  spec.reviews_per_user = 8;
  spec.affinity = 0.9;
  const auto synth = synth_generate(spec);
  const Fixture fx(synth.dataset, small_hp());
  GrowOptions opt;
  opt.max_depth = 2;
  const auto tree = grow(fx.context(Side::kUser), fx.user_profiles,
                         fx.spec.user_thresholds, opt, 1);
  ASSERT_FALSE(tree.root().is_leaf());
  const int planted = spec.user_clusters * spec.features_per_cluster;
  EXPECT_LT(tree.root().predicate->feature, planted);
  int majority_total = 0;
  for (int c : *tree.root().children) {
    std::map<int, int> counts;
    for (int u : tree.node(c).members) ++counts[synth.user_cluster[u]];
    int best = 0;
    for (const auto& [_, n] : counts) best = std::max(best, n);
    majority_total += best;
  }
  EXPECT_GE(majority_total, 0.9 * spec.users);
}

TEST(Route, AgreesWithLeafAssignment) {
  for (Side side : {Side::kUser, Side::kItem}) {
    const Fixture fx(testing::small_planted(9), small_hp());
    GrowOptions opt;
    opt.max_depth = 3;
    const auto ctx = fx.context(side);
    const auto tree = grow(ctx, fx.profiles(side), fx.spec.thresholds(side), opt, 2);
    const auto leaf = tree.leaf_assignment(ctx.num_entities());
    for (int e = 0; e < ctx.num_entities(); ++e) {
      const auto path = route(tree, fx.profiles(side)[e]);
      EXPECT_EQ(path.front(), 0);
      EXPECT_EQ(path.back(), leaf[e]);
      EXPECT_EQ(path, tree.path_to(leaf[e]));
    }
  }
}

TEST(PersonalResiduals, HeavyRegularizationCollapsesToLeaf) {
  Hyperparams hp = small_hp();
  const Fixture fx(testing::small_planted(10), hp);
  auto ctx = fx.context(Side::kUser);
  GrowOptions opt;
  opt.max_depth = 2;
  const auto tree = grow(ctx, fx.user_profiles, fx.spec.user_thresholds, opt, 3);
  ctx.hp.lambda_u = 1e6;
  const auto personal = fit_personal_residuals(ctx, tree, 4);
  for (double v : personal.values()) EXPECT_LT(std::abs(v), 1e-4);
  const auto harvested = harvest_factors(tree, ctx.num_entities(), &personal);
  const auto plain = harvest_factors(tree, ctx.num_entities(), nullptr);
  const auto leaf = tree.leaf_assignment(ctx.num_entities());
  for (int e = 0; e < ctx.num_entities(); ++e) {
    for (int k = 0; k < 2; ++k) {
      EXPECT_EQ(plain.row(e)[k], tree.node(leaf[e]).accumulated[k]);
      EXPECT_NEAR(harvested.row(e)[k], plain.row(e)[k], 1e-4);
    }
  }
}

TEST(PersonalResiduals, LowerEntityObjective) {
  const Fixture fx(testing::small_planted(11), small_hp());
  const auto ctx = fx.context(Side::kUser);
  GrowOptions opt;
  opt.max_depth = 2;
  const auto tree = grow(ctx, fx.user_profiles, fx.spec.user_thresholds, opt, 3);
  const auto personal = fit_personal_residuals(ctx, tree, 4);
  const auto plain = harvest_factors(tree, ctx.num_entities(), nullptr);
  const auto with = harvest_factors(tree, ctx.num_entities(), &personal);
  for (int u = 0; u < ctx.num_entities(); ++u) {
    const std::vector<int> one{u};
    const std::vector<double> a(plain.row(u).begin(), plain.row(u).end());
    const std::vector<double> b(with.row(u).begin(), with.row(u).end());
    const double lam = ctx.hp.lambda_u;
    double reg = 0;
    for (double v : personal.row(u)) reg += lam * v * v;
    EXPECT_LE(shared_vector_loss(ctx, one, b) + reg,
              shared_vector_loss(ctx, one, a) + 1e-9);
  }
}

}  // namespace
}  // namespace factree
