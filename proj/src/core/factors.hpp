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

#ifndef FACTREE_CORE_FACTORS_HPP_
#define FACTREE_CORE_FACTORS_HPP_

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "core/dataset.hpp"

namespace factree {

// Dense row-per-entity matrix of latent vectors.
class FactorMatrix {
 public:
  FactorMatrix() = default;
  FactorMatrix(int rows, int dim) : rows_(rows), dim_(dim), values_(rows * dim) {}

  static FactorMatrix uniform(int rows, int dim, double scale,
                              std::uint64_t seed);

  int rows() const { return rows_; }
  int dim() const { return dim_; }

  std::span<double> row(int r) {
    return {values_.data() + static_cast<std::size_t>(r) * dim_,
            static_cast<std::size_t>(dim_)};
  }
  std::span<const double> row(int r) const {
    return {values_.data() + static_cast<std::size_t>(r) * dim_,
            static_cast<std::size_t>(dim_)};
  }

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  bool all_finite() const;
  double squared_norm() const;

  bool operator==(const FactorMatrix&) const = default;

 private:
  int rows_ = 0;
  int dim_ = 0;
  std::vector<double> values_;
};

struct Hyperparams {
  int dim = 20;
  double lambda_b = 0.1;
  double lambda_u = 0.1;
  double lambda_v = 0.1;
  double lr = 0.01;
  int epochs = 30;
  // BPR pair steps per epoch; 0 means one shuffled pass over every pair.
  int n_bpr = 0;
  std::uint64_t seed = 42;
  double tol = 1e-6;
  int negatives_per_positive = 1;
  double init_scale = 0.01;
  // Alternating rounds for plain matrix factorization.
  int mf_rounds = 10;
  // Epochs for per-entity residual fits, which see only a handful of
  // observations per pass.
  int personal_epochs = 300;

  double lambda_for(Side side) const {
    return side == Side::kUser ? lambda_u : lambda_v;
  }
  void validate() const;
};

struct Observation {
  int user;
  int item;
  double rating;
};

struct RatedEntity {
  int other;
  double rating;
};

// Observation indexes from both sides.
struct Interactions {
  int num_users = 0;
  int num_items = 0;
  std::vector<Observation> observations;
  std::vector<std::vector<RatedEntity>> by_user;  // sorted by item
  std::vector<std::vector<RatedEntity>> by_item;  // sorted by user

  static Interactions from(const Dataset& ds);
};

struct BprPair {
  int win;
  int lose;

  bool operator==(const BprPair&) const = default;
  auto operator<=>(const BprPair&) const = default;
};

// Per-user ordered item pairs: `win` should rank above `lose`.
using BprPairSet = std::vector<std::vector<BprPair>>;

std::vector<BprPair> build_bpr_pairs(const Interactions& data, int user,
                                     int negatives_per_positive,
                                     std::mt19937_64& rng);
BprPairSet build_all_bpr_pairs(const Interactions& data,
                               int negatives_per_positive, std::uint64_t seed);

// Numerically stable log(sigmoid(x)) and sigmoid(x).
double log_sigmoid(double x);
double sigmoid(double x);

double dot(std::span<const double> a, std::span<const double> b);

double pointwise_loss(const FactorMatrix& users, const FactorMatrix& items,
                      std::span<const Observation> observations);
double bpr_loss(std::span<const double> user, const FactorMatrix& items,
                std::span<const BprPair> pairs);
// L(U,V,O) - lambda_b * sum_i B(u_i, V, D_i) + lambda_u |U|^2 + lambda_v |V|^2
double objective(const FactorMatrix& users, const FactorMatrix& items,
                 std::span<const Observation> observations,
                 const BprPairSet& pairs, const Hyperparams& hp);
// Analytic gradient of objective() with respect to every factor entry.
void objective_gradient(const FactorMatrix& users, const FactorMatrix& items,
                        std::span<const Observation> observations,
                        const BprPairSet& pairs, const Hyperparams& hp,
                        FactorMatrix& grad_users, FactorMatrix& grad_items);

// phi = lambda_b * N_BPR * T_iter / (m * n^2), with N_BPR = hp.n_bpr and
// T_iter = hp.epochs.
double relative_bpr_weight(const Hyperparams& hp, int num_users, int num_items);

// Mixes a salt into a seed (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt);

struct SolverSettings {
  double lambda_reg = 0.0;
  double lambda_bpr = 0.0;
  double lr = 0.01;
  int epochs = 30;
  int n_bpr = 0;
  double tol = 1e-6;
  std::uint64_t seed = 0;

  static SolverSettings from(const Hyperparams& hp, Side side);
};

struct GroupFit {
  std::vector<double> residuals;  // groups x dim
  double objective = 0.0;
  double initial_objective = 0.0;
  int best_epoch = 0;
  int epochs_run = 0;
};

// Endpoint of an item-side BPR term: either a fitted group or a fixed vector.
struct PairEndpoint {
  int group = -1;
  const double* fixed = nullptr;
};

// A set of latent vectors x_g = base_g + w_g where only the residuals w_g are
// fitted; all other vectors are frozen. Groups with several members share one
// residual. The objective is
//   sum (r - x_g . c)^2 - lambda_bpr * sum log sigmoid(s) + lambda_reg |w|^2
// and it is minimized by SGD with best-iterate selection.
//
// Vectors passed to add_* must outlive the problem.
class GroupProblem {
 public:
  GroupProblem(int groups, int dim);

  int groups() const { return groups_; }
  int dim() const { return dim_; }

  void set_base(int group, std::span<const double> base);
  void set_init(int group, std::span<const double> init);

  void add_rating(int group, std::span<const double> counterpart,
                  double rating);
  // s = x_g . (win - lose)
  void add_user_pair(int group, std::span<const double> win,
                     std::span<const double> lose);
  // s = user . (x_win - x_lose)
  void add_item_pair(std::span<const double> user, PairEndpoint win,
                     PairEndpoint lose);

  std::size_t num_ratings() const { return ratings_.size(); }
  std::size_t num_pairs() const {
    return user_pairs_.size() + item_pairs_.size();
  }

  double objective(std::span<const double> residuals,
                   const SolverSettings& settings) const;
  GroupFit solve(const SolverSettings& settings) const;

 private:
  struct RatingTerm {
    int group;
    const double* counterpart;
    double rating;
  };
  struct UserPairTerm {
    int group;
    const double* win;
    const double* lose;
  };
  struct ItemPairTerm {
    const double* user;
    PairEndpoint win;
    PairEndpoint lose;
  };

  void endpoint_vector(const PairEndpoint& e, std::span<const double> w,
                       double* out) const;

  int groups_;
  int dim_;
  std::vector<double> base_;
  std::vector<double> init_;
  std::vector<bool> has_terms_;
  std::vector<RatingTerm> ratings_;
  std::vector<UserPairTerm> user_pairs_;
  std::vector<ItemPairTerm> item_pairs_;
};

// Fits one side's per-entity factors with the counterpart frozen.
FactorMatrix fit_factors(Side side, const FactorMatrix& counterpart,
                         const Interactions& data, const BprPairSet& pairs,
                         const Hyperparams& hp, const FactorMatrix& init);

struct FlatFactors {
  FactorMatrix users;
  FactorMatrix items;
  double objective = 0.0;
};

// Plain matrix factorization: alternate fit_factors on free U and V.
FlatFactors train_flat_mf(const Interactions& data, const BprPairSet& pairs,
                          const Hyperparams& hp);

}  // namespace factree

#endif  // FACTREE_CORE_FACTORS_HPP_
