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

#include "core/tree.hpp"

#include <algorithm>
#include <atomic>
#include <deque>
#include <exception>
#include <thread>

#include "core/error.hpp"

namespace factree {

const char* branch_name(Branch b) {
  switch (b) {
    case Branch::kLeft:
      return "L";
    case Branch::kRight:
      return "R";
    case Branch::kUnknown:
      return "E";
  }
  return "?";
}

Branch evaluate_predicate(const FeatureProfile& profile, const Predicate& p) {
  const auto value = profile.get(p.feature);
  if (!value) return Branch::kUnknown;
  return *value >= p.threshold ? Branch::kLeft : Branch::kRight;
}

int FactorTree::dim() const {
  return nodes.empty() ? 0 : static_cast<int>(root().accumulated.size());
}

int FactorTree::levels() const {
  int deepest = 0;
  for (const auto& n : nodes) deepest = std::max(deepest, n.depth);
  return nodes.empty() ? 0 : deepest + 1;
}

std::vector<int> FactorTree::path_to(int id) const {
  std::vector<int> path;
  for (int cur = id; cur >= 0; cur = nodes.at(cur).parent) path.push_back(cur);
  std::reverse(path.begin(), path.end());
  return path;
}

std::vector<int> FactorTree::leaf_assignment(int num_entities) const {
  std::vector<int> leaf(num_entities, -1);
  for (const auto& n : nodes) {
    if (!n.is_leaf()) continue;
    for (int e : n.members) leaf.at(e) = n.id;
  }
  return leaf;
}

bool Partition::degenerate() const {
  int nonempty = 0;
  for (const auto& g : groups) nonempty += g.empty() ? 0 : 1;
  return nonempty <= 1;
}

Partition partition(std::span<const int> entities, const ProfileSet& profiles,
                    const Predicate& predicate) {
  Partition out;
  for (int e : entities) {
    const Branch b = evaluate_predicate(profiles[e], predicate);
    out.groups[static_cast<int>(b)].push_back(e);
  }
  for (auto& g : out.groups) std::sort(g.begin(), g.end());
  return out;
}

TrainingData TrainingData::build(const Dataset& ds, const Hyperparams& hp) {
  Interactions interactions = Interactions::from(ds);
  BprPairSet pairs = build_all_bpr_pairs(interactions, hp.negatives_per_positive,
                                         derive_seed(hp.seed, 0x5eed));
  return build(std::move(interactions), std::move(pairs));
}

TrainingData TrainingData::build(Interactions interactions, BprPairSet pairs) {
  TrainingData out;
  out.interactions = std::move(interactions);
  out.pairs = std::move(pairs);
  out.pairs.resize(out.interactions.num_users);
  out.item_pair_refs.resize(out.interactions.num_items);
  for (int u = 0; u < static_cast<int>(out.pairs.size()); ++u) {
    for (int k = 0; k < static_cast<int>(out.pairs[u].size()); ++k) {
      const BprPair& p = out.pairs[u][k];
      out.item_pair_refs[p.win].push_back({u, k});
      out.item_pair_refs[p.lose].push_back({u, k});
    }
  }
  return out;
}

int FitContext::num_entities() const {
  return side == Side::kUser ? data->interactions.num_users
                             : data->interactions.num_items;
}

int FitContext::count_ratings(int entity) const {
  const auto& index = side == Side::kUser ? data->interactions.by_user
                                          : data->interactions.by_item;
  return static_cast<int>(index[entity].size());
}

GroupProblem build_group_problem(const FitContext& ctx,
                                 std::span<const int> members,
                                 std::span<const int> group_of,
                                 std::span<const std::vector<double>> bases) {
  const int d = ctx.hp.dim;
  const int groups = static_cast<int>(bases.size());
  GroupProblem problem(groups, d);
  for (int g = 0; g < groups; ++g) problem.set_base(g, bases[g]);

  const TrainingData& data = *ctx.data;
  const FactorMatrix& other = *ctx.counterpart;
  const bool use_pairs = ctx.hp.lambda_b != 0.0;

  if (ctx.side == Side::kUser) {
    for (std::size_t k = 0; k < members.size(); ++k) {
      const int u = members[k];
      const int g = group_of[k];
      for (const auto& o : data.interactions.by_user[u]) {
        problem.add_rating(g, other.row(o.other), o.rating);
      }
      if (!use_pairs) continue;
      for (const auto& p : data.pairs[u]) {
        problem.add_user_pair(g, other.row(p.win), other.row(p.lose));
      }
    }
    return problem;
  }

  std::vector<int> entity_group(data.interactions.num_items, -1);
  for (std::size_t k = 0; k < members.size(); ++k) {
    entity_group[members[k]] = group_of[k];
  }
  for (std::size_t k = 0; k < members.size(); ++k) {
    const int i = members[k];
    for (const auto& o : data.interactions.by_item[i]) {
      problem.add_rating(group_of[k], other.row(o.other), o.rating);
    }
  }
  if (!use_pairs) return problem;

  std::vector<std::pair<int, int>> refs;
  for (int i : members) {
    const auto& r = data.item_pair_refs[i];
    refs.insert(refs.end(), r.begin(), r.end());
  }
  std::sort(refs.begin(), refs.end());
  refs.erase(std::unique(refs.begin(), refs.end()), refs.end());
  auto endpoint = [&](int item) -> PairEndpoint {
    if (entity_group[item] >= 0) return {entity_group[item], nullptr};
    if (ctx.same_side == nullptr) {
      throw Error(ErrorCode::kInternal,
                  "item-side fit needs frozen factors for outside items");
    }
    return {-1, ctx.same_side->row(item).data()};
  };
  for (const auto& [u, idx] : refs) {
    const BprPair& p = data.pairs[u][idx];
    problem.add_item_pair(other.row(u), endpoint(p.win), endpoint(p.lose));
  }
  return problem;
}

SplitResult evaluate_split(const FitContext& ctx, std::span<const int> members,
                           const ProfileSet& profiles,
                           const Predicate& predicate,
                           std::span<const double> parent_accumulated,
                           std::uint64_t seed) {
  const int d = ctx.hp.dim;
  SplitResult result;
  result.predicate = predicate;
  result.children = partition(members, profiles, predicate);

  std::vector<int> ordered;
  std::vector<int> group_of;
  for (int g = 0; g < 3; ++g) {
    result.sizes[g] = result.children.groups[g].size();
    for (int e : result.children.groups[g]) {
      ordered.push_back(e);
      group_of.push_back(g);
    }
  }
  // Terms follow the caller's member order so every candidate at a node sees
  // the same SGD visiting sequence.
  std::vector<int> member_group(members.size());
  {
    std::vector<std::pair<int, int>> lookup;
    for (std::size_t k = 0; k < ordered.size(); ++k) {
      lookup.push_back({ordered[k], group_of[k]});
    }
    std::sort(lookup.begin(), lookup.end());
    for (std::size_t k = 0; k < members.size(); ++k) {
      auto it = std::lower_bound(lookup.begin(), lookup.end(),
                                 std::make_pair(members[k], -1));
      member_group[k] = it->second;
    }
  }

  std::vector<double> base(d, 0.0);
  if (ctx.use_parent_factors) {
    base.assign(parent_accumulated.begin(), parent_accumulated.end());
  }
  const std::vector<std::vector<double>> bases(3, base);
  const GroupProblem problem =
      build_group_problem(ctx, members, member_group, bases);
  SolverSettings settings = SolverSettings::from(ctx.hp, ctx.side);
  settings.seed = seed;
  const GroupFit fit = problem.solve(settings);

  result.objective = fit.objective;
  result.initial_objective = fit.initial_objective;
  for (int g = 0; g < 3; ++g) {
    result.residuals[g].assign(fit.residuals.begin() + g * d,
                               fit.residuals.begin() + (g + 1) * d);
    result.accumulated[g].resize(d);
    for (int k = 0; k < d; ++k) {
      result.accumulated[g][k] = base[k] + result.residuals[g][k];
    }
  }
  return result;
}

std::optional<SplitResult> select_predicate(
    const FitContext& ctx, std::span<const int> members,
    const ProfileSet& profiles,
    const std::vector<std::vector<double>>& thresholds,
    std::span<const double> parent_accumulated, std::uint64_t seed,
    const SelectOptions& options) {
  if (members.empty()) throw ValidationError("cannot split an empty node");

  std::vector<Predicate> candidates;
  for (int f = 0; f < static_cast<int>(thresholds.size()); ++f) {
    if (std::find(options.excluded_features.begin(),
                  options.excluded_features.end(),
                  f) != options.excluded_features.end()) {
      continue;
    }
    for (double t : thresholds[f]) {
      const Predicate p{f, t};
      if (!partition(members, profiles, p).degenerate()) {
        candidates.push_back(p);
      }
    }
  }
  if (candidates.empty()) return std::nullopt;

  std::vector<std::optional<SplitResult>> results(candidates.size());
  std::vector<std::exception_ptr> errors(candidates.size());
  auto run = [&](std::size_t c) {
    try {
      results[c] = evaluate_split(ctx, members, profiles, candidates[c],
                                  parent_accumulated, seed);
    } catch (...) {
      errors[c] = std::current_exception();
    }
  };
  const int threads = std::max(1, std::min<int>(options.threads,
                                                static_cast<int>(candidates.size())));
  if (threads == 1) {
    for (std::size_t c = 0; c < candidates.size(); ++c) run(c);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t c = next++; c < candidates.size(); c = next++) run(c);
      });
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  // Candidates are in (feature, threshold) order, so keeping the incumbent
  // on ties picks the lexicographically smallest.
  std::size_t best = 0;
  for (std::size_t c = 1; c < results.size(); ++c) {
    if (improves(results[c]->objective, results[best]->objective)) best = c;
  }
  return std::move(results[best]);
}

double shared_vector_loss(const FitContext& ctx, std::span<const int> members,
                          std::span<const double> vector) {
  const std::vector<int> group_of(members.size(), 0);
  const std::vector<std::vector<double>> bases{
      std::vector<double>(vector.begin(), vector.end())};
  const GroupProblem problem =
      build_group_problem(ctx, members, group_of, bases);
  SolverSettings settings = SolverSettings::from(ctx.hp, ctx.side);
  const std::vector<double> zero(ctx.hp.dim, 0.0);
  return problem.objective(zero, settings);
}

FactorTree grow(const FitContext& ctx, const ProfileSet& profiles,
                const std::vector<std::vector<double>>& thresholds,
                const GrowOptions& options, std::uint64_t seed) {
  if (options.max_depth < 1) throw ValidationError("tree depth must be >= 1");
  const int d = ctx.hp.dim;
  const int count = ctx.num_entities();

  FactorTree tree;
  tree.side = ctx.side;
  tree.max_depth = options.max_depth;

  TreeNode root;
  root.id = 0;
  root.depth = 0;
  for (int e = 0; e < count; ++e) root.members.push_back(e);
  {
    const std::vector<int> group_of(root.members.size(), 0);
    const std::vector<std::vector<double>> bases{std::vector<double>(d, 0.0)};
    const GroupProblem problem =
        build_group_problem(ctx, root.members, group_of, bases);
    SolverSettings settings = SolverSettings::from(ctx.hp, ctx.side);
    settings.seed = derive_seed(seed, 0);
    const GroupFit fit = problem.solve(settings);
    root.residual = fit.residuals;
    root.accumulated = fit.residuals;
    root.objective = fit.objective;
  }
  tree.nodes.push_back(std::move(root));

  std::deque<int> queue{0};
  while (!queue.empty()) {
    const int id = queue.front();
    queue.pop_front();
    // Copy what we need; push_back below may reallocate.
    const int depth = tree.nodes[id].depth;
    const std::vector<int> members = tree.nodes[id].members;
    const std::vector<double> acc = tree.nodes[id].accumulated;
    if (depth + 1 >= options.max_depth) continue;
    if (static_cast<int>(members.size()) <= options.min_node_size) continue;

    SelectOptions select;
    select.threads = options.threads;
    for (int a : tree.path_to(id)) {
      if (tree.nodes[a].predicate) {
        select.excluded_features.push_back(tree.nodes[a].predicate->feature);
      }
    }
    auto split = select_predicate(ctx, members, profiles, thresholds, acc,
                                  derive_seed(seed, id + 1), select);
    if (!split) continue;

    std::array<int, 3> children{};
    for (int g = 0; g < 3; ++g) {
      TreeNode child;
      child.id = static_cast<int>(tree.nodes.size());
      child.parent = id;
      child.depth = depth + 1;
      child.members = split->children.groups[g];
      child.accumulated = split->accumulated[g];
      child.residual.resize(d);
      for (int k = 0; k < d; ++k) {
        child.residual[k] = ctx.use_parent_factors
                                ? split->residuals[g][k]
                                : child.accumulated[k] - acc[k];
      }
      child.objective = split->objective;
      children[g] = child.id;
      tree.nodes.push_back(std::move(child));
      queue.push_back(children[g]);
    }
    TreeNode& node = tree.nodes[id];
    node.predicate = split->predicate;
    node.children = children;
    node.split_objective = split->objective;
    node.unsplit_objective = shared_vector_loss(ctx, members, acc);
  }
  return tree;
}

std::vector<int> route(const FactorTree& tree, const FeatureProfile& profile) {
  std::vector<int> path{0};
  const TreeNode* node = &tree.root();
  while (!node->is_leaf()) {
    const Branch b = evaluate_predicate(profile, *node->predicate);
    const int next = (*node->children)[static_cast<int>(b)];
    path.push_back(next);
    node = &tree.node(next);
  }
  return path;
}

FactorMatrix fit_personal_residuals(const FitContext& ctx,
                                    const FactorTree& tree,
                                    std::uint64_t seed) {
  const int d = ctx.hp.dim;
  const int count = ctx.num_entities();
  const std::vector<int> leaf = tree.leaf_assignment(count);
  FactorMatrix residuals(count, d);
  for (int e = 0; e < count; ++e) {
    if (ctx.count_ratings(e) == 0) continue;
    const auto& leaf_acc = tree.node(leaf[e]).accumulated;
    std::vector<std::vector<double>> bases{
        ctx.use_parent_factors ? leaf_acc : std::vector<double>(d, 0.0)};
    const int members[] = {e};
    const int group_of[] = {0};
    const GroupProblem problem =
        build_group_problem(ctx, members, group_of, bases);
    SolverSettings settings = SolverSettings::from(ctx.hp, ctx.side);
    settings.seed = derive_seed(seed, e);
    settings.epochs = ctx.hp.personal_epochs;
    const GroupFit fit = problem.solve(settings);
    auto out = residuals.row(e);
    for (int k = 0; k < d; ++k) {
      out[k] = ctx.use_parent_factors ? fit.residuals[k]
                                      : fit.residuals[k] - leaf_acc[k];
    }
  }
  return residuals;
}

FactorMatrix harvest_factors(const FactorTree& tree, int num_entities,
                             const FactorMatrix* personal) {
  const int d = tree.dim();
  const std::vector<int> leaf = tree.leaf_assignment(num_entities);
  FactorMatrix out(num_entities, d);
  for (int e = 0; e < num_entities; ++e) {
    const auto& acc = tree.node(leaf[e]).accumulated;
    auto row = out.row(e);
    for (int k = 0; k < d; ++k) {
      row[k] = acc[k] + (personal ? personal->row(e)[k] : 0.0);
    }
  }
  return out;
}

}  // namespace factree
