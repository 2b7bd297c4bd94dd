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

#ifndef FACTREE_CORE_TREE_HPP_
#define FACTREE_CORE_TREE_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "core/dataset.hpp"
#include "core/factors.hpp"

namespace factree {

struct Predicate {
  int feature = 0;
  double threshold = 0.0;

  bool operator==(const Predicate&) const = default;
};

// Outcome of a predicate: L is F >= t, R is F < t, E is unknown.
enum class Branch : int { kLeft = 0, kRight = 1, kUnknown = 2 };

const char* branch_name(Branch b);
Branch evaluate_predicate(const FeatureProfile& profile, const Predicate& p);

struct TreeNode {
  int id = 0;
  int parent = -1;
  int depth = 0;  // root is 0
  std::optional<Predicate> predicate;
  std::optional<std::array<int, 3>> children;  // L, R, E
  std::vector<double> residual;
  std::vector<double> accumulated;  // parent accumulated + residual
  std::vector<int> members;
  // Objective of this node's own factor fit.
  double objective = std::numeric_limits<double>::quiet_NaN();
  // For internal nodes: the chosen split's objective and the objective of
  // keeping every member at this node's vector.
  double split_objective = std::numeric_limits<double>::quiet_NaN();
  double unsplit_objective = std::numeric_limits<double>::quiet_NaN();

  bool is_leaf() const { return !predicate.has_value(); }
};

class FactorTree {
 public:
  Side side = Side::kUser;
  int max_depth = 1;  // maximum number of node levels
  std::vector<TreeNode> nodes;

  const TreeNode& root() const { return nodes.front(); }
  const TreeNode& node(int id) const { return nodes.at(id); }
  int dim() const;
  // Number of node levels actually used (1 for a lone root).
  int levels() const;

  // Node ids from the root down to `id`.
  std::vector<int> path_to(int id) const;
  // entity -> leaf id, from the member lists.
  std::vector<int> leaf_assignment(int num_entities) const;
};

struct Partition {
  std::array<std::vector<int>, 3> groups;  // L, R, E

  // True when every entity lands in a single child.
  bool degenerate() const;
};

Partition partition(std::span<const int> entities, const ProfileSet& profiles,
                    const Predicate& predicate);

// Read-only observation context shared by every fit of one training run.
struct TrainingData {
  Interactions interactions;
  BprPairSet pairs;
  // item -> (user, index into pairs[user]) for every pair touching the item.
  std::vector<std::vector<std::pair<int, int>>> item_pair_refs;

  static TrainingData build(const Dataset& ds, const Hyperparams& hp);
  static TrainingData build(Interactions interactions, BprPairSet pairs);
};

struct FitContext {
  Side side = Side::kUser;
  const TrainingData* data = nullptr;
  const FactorMatrix* counterpart = nullptr;  // frozen factors of other side
  // Frozen same-side factors for item-side BPR endpoints outside the node.
  const FactorMatrix* same_side = nullptr;
  Hyperparams hp;
  bool use_parent_factors = true;

  int num_entities() const;
  int count_ratings(int entity) const;
};

// Builds the shared-vector problem for `members` where member k belongs to
// group `group_of[k]`. Every group starts at zero residual over `bases[g]`.
GroupProblem build_group_problem(const FitContext& ctx,
                                 std::span<const int> members,
                                 std::span<const int> group_of,
                                 std::span<const std::vector<double>> bases);

struct SplitResult {
  Predicate predicate;
  Partition children;
  std::array<std::vector<double>, 3> residuals;
  std::array<std::vector<double>, 3> accumulated;
  double objective = 0.0;
  // Objective of the same problem at zero residuals.
  double initial_objective = 0.0;
  std::array<std::size_t, 3> sizes{};
};

SplitResult evaluate_split(const FitContext& ctx, std::span<const int> members,
                           const ProfileSet& profiles,
                           const Predicate& predicate,
                           std::span<const double> parent_accumulated,
                           std::uint64_t seed);

struct SelectOptions {
  std::vector<int> excluded_features;
  int threads = 1;
};

// Objectives this close (relative) count as tied; equivalent partitions
// differ only by summation order.
inline constexpr double kSplitTieTolerance = 1e-12;

inline bool improves(double candidate, double incumbent) {
  return candidate < incumbent - kSplitTieTolerance * std::max(1.0, std::abs(incumbent));
}

// Exhaustive argmin over every (feature, threshold) candidate. Returns
// nullopt when no candidate separates the members.
std::optional<SplitResult> select_predicate(
    const FitContext& ctx, std::span<const int> members,
    const ProfileSet& profiles,
    const std::vector<std::vector<double>>& thresholds,
    std::span<const double> parent_accumulated, std::uint64_t seed,
    const SelectOptions& options = {});

// Loss of all members sharing `vector` (no regularization).
double shared_vector_loss(const FitContext& ctx, std::span<const int> members,
                          std::span<const double> vector);

struct GrowOptions {
  int max_depth = 6;
  int min_node_size = 1;
  int threads = 1;
};

FactorTree grow(const FitContext& ctx, const ProfileSet& profiles,
                const std::vector<std::vector<double>>& thresholds,
                const GrowOptions& options, std::uint64_t seed);

std::vector<int> route(const FactorTree& tree, const FeatureProfile& profile);

// Per-entity residual on top of the entity's leaf vector.
FactorMatrix fit_personal_residuals(const FitContext& ctx,
                                    const FactorTree& tree, std::uint64_t seed);

// Leaf accumulated vector (+ personal residual) for every entity.
FactorMatrix harvest_factors(const FactorTree& tree, int num_entities,
                             const FactorMatrix* personal);

}  // namespace factree

#endif  // FACTREE_CORE_TREE_HPP_
