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

#include "core/factors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "core/error.hpp"

namespace factree {

FactorMatrix FactorMatrix::uniform(int rows, int dim, double scale,
                                   std::uint64_t seed) {
  FactorMatrix m(rows, dim);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-scale, scale);
  for (double& v : m.values_) v = dist(rng);
  return m;
}

bool FactorMatrix::all_finite() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](double v) { return std::isfinite(v); });
}

double FactorMatrix::squared_norm() const {
  double s = 0.0;
  for (double v : values_) s += v * v;
  return s;
}

void Hyperparams::validate() const {
  if (dim < 1) throw ValidationError("latent dimension must be >= 1");
  if (!(lr > 0.0)) throw ValidationError("learning rate must be > 0");
  if (lambda_b < 0.0 || lambda_u < 0.0 || lambda_v < 0.0) {
    throw ValidationError("regularization weights must be >= 0");
  }
  if (epochs < 0 || n_bpr < 0 || negatives_per_positive < 0 || mf_rounds < 0 ||
      personal_epochs < 0) {
    throw ValidationError("iteration counts must be >= 0");
  }
}

Interactions Interactions::from(const Dataset& ds) {
  Interactions out;
  out.num_users = ds.num_users();
  out.num_items = ds.num_items();
  out.by_user.resize(out.num_users);
  out.by_item.resize(out.num_items);
  out.observations.reserve(ds.reviews.size());
  for (const Review& r : ds.reviews) {
    out.observations.push_back({r.user, r.item, r.rating});
    out.by_user[r.user].push_back({r.item, r.rating});
    out.by_item[r.item].push_back({r.user, r.rating});
  }
  auto by_other = [](const RatedEntity& a, const RatedEntity& b) {
    return a.other < b.other;
  };
  for (auto& v : out.by_user) std::sort(v.begin(), v.end(), by_other);
  for (auto& v : out.by_item) std::sort(v.begin(), v.end(), by_other);
  return out;
}

std::vector<BprPair> build_bpr_pairs(const Interactions& data, int user,
                                     int negatives_per_positive,
                                     std::mt19937_64& rng) {
  const auto& rated = data.by_user[user];
  std::vector<BprPair> pairs;
  for (const auto& a : rated) {
    for (const auto& b : rated) {
      if (a.rating > b.rating) pairs.push_back({a.other, b.other});
    }
  }
  if (negatives_per_positive <= 0) return pairs;

  std::vector<int> unobserved;
  std::size_t next = 0;
  for (int item = 0; item < data.num_items; ++item) {
    if (next < rated.size() && rated[next].other == item) {
      ++next;
      continue;
    }
    unobserved.push_back(item);
  }
  if (unobserved.empty()) return pairs;

  const std::size_t per_positive =
      std::min<std::size_t>(negatives_per_positive, unobserved.size());
  std::uniform_int_distribution<std::size_t> pick(0, unobserved.size() - 1);
  std::vector<int> chosen;
  for (const auto& a : rated) {
    chosen.clear();
    while (chosen.size() < per_positive) {
      const int l = unobserved[pick(rng)];
      if (std::find(chosen.begin(), chosen.end(), l) == chosen.end()) {
        chosen.push_back(l);
      }
    }
    for (int l : chosen) pairs.push_back({a.other, l});
  }
  return pairs;
}

BprPairSet build_all_bpr_pairs(const Interactions& data,
                               int negatives_per_positive,
                               std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  BprPairSet out(data.num_users);
  for (int u = 0; u < data.num_users; ++u) {
    out[u] = build_bpr_pairs(data, u, negatives_per_positive, rng);
  }
  return out;
}

double log_sigmoid(double x) {
  return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

double pointwise_loss(const FactorMatrix& users, const FactorMatrix& items,
                      std::span<const Observation> observations) {
  double loss = 0.0;
  for (const auto& o : observations) {
    const double e = o.rating - dot(users.row(o.user), items.row(o.item));
    loss += e * e;
  }
  return loss;
}

double bpr_loss(std::span<const double> user, const FactorMatrix& items,
                std::span<const BprPair> pairs) {
  double loss = 0.0;
  for (const auto& p : pairs) {
    loss += log_sigmoid(dot(user, items.row(p.win)) -
                        dot(user, items.row(p.lose)));
  }
  return loss;
}

double objective(const FactorMatrix& users, const FactorMatrix& items,
                 std::span<const Observation> observations,
                 const BprPairSet& pairs, const Hyperparams& hp) {
  double value = pointwise_loss(users, items, observations);
  if (hp.lambda_b != 0.0) {
    double bpr = 0.0;
    for (std::size_t u = 0; u < pairs.size(); ++u) {
      bpr += bpr_loss(users.row(static_cast<int>(u)), items, pairs[u]);
    }
    value -= hp.lambda_b * bpr;
  }
  return value + hp.lambda_u * users.squared_norm() +
         hp.lambda_v * items.squared_norm();
}

void objective_gradient(const FactorMatrix& users, const FactorMatrix& items,
                        std::span<const Observation> observations,
                        const BprPairSet& pairs, const Hyperparams& hp,
                        FactorMatrix& grad_users, FactorMatrix& grad_items) {
  const int d = users.dim();
  grad_users = FactorMatrix(users.rows(), d);
  grad_items = FactorMatrix(items.rows(), d);
  for (const auto& o : observations) {
    auto u = users.row(o.user);
    auto v = items.row(o.item);
    const double e = o.rating - dot(u, v);
    auto gu = grad_users.row(o.user);
    auto gv = grad_items.row(o.item);
    for (int k = 0; k < d; ++k) {
      gu[k] += -2.0 * e * v[k];
      gv[k] += -2.0 * e * u[k];
    }
  }
  if (hp.lambda_b != 0.0) {
    for (std::size_t ui = 0; ui < pairs.size(); ++ui) {
      const int user = static_cast<int>(ui);
      auto u = users.row(user);
      auto gu = grad_users.row(user);
      for (const auto& p : pairs[ui]) {
        auto vw = items.row(p.win);
        auto vl = items.row(p.lose);
        const double s = dot(u, vw) - dot(u, vl);
        // d/ds of -lambda_b * log sigmoid(s)
        const double c = -hp.lambda_b * sigmoid(-s);
        auto gw = grad_items.row(p.win);
        auto gl = grad_items.row(p.lose);
        for (int k = 0; k < d; ++k) {
          gu[k] += c * (vw[k] - vl[k]);
          gw[k] += c * u[k];
          gl[k] -= c * u[k];
        }
      }
    }
  }
  for (std::size_t i = 0; i < users.values().size(); ++i) {
    grad_users.values()[i] += 2.0 * hp.lambda_u * users.values()[i];
  }
  for (std::size_t i = 0; i < items.values().size(); ++i) {
    grad_items.values()[i] += 2.0 * hp.lambda_v * items.values()[i];
  }
}

double relative_bpr_weight(const Hyperparams& hp, int num_users,
                           int num_items) {
  if (num_users < 1 || num_items < 1) {
    throw ValidationError("entity counts must be >= 1");
  }
  const double n = num_items;
  return hp.lambda_b * static_cast<double>(hp.n_bpr) * hp.epochs /
         (static_cast<double>(num_users) * n * n);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

SolverSettings SolverSettings::from(const Hyperparams& hp, Side side) {
  SolverSettings s;
  s.lambda_reg = hp.lambda_for(side);
  s.lambda_bpr = hp.lambda_b;
  s.lr = hp.lr;
  s.epochs = hp.epochs;
  s.n_bpr = hp.n_bpr;
  s.tol = hp.tol;
  s.seed = hp.seed;
  return s;
}

GroupProblem::GroupProblem(int groups, int dim)
    : groups_(groups),
      dim_(dim),
      base_(static_cast<std::size_t>(groups) * dim, 0.0),
      init_(static_cast<std::size_t>(groups) * dim, 0.0),
      has_terms_(groups, false) {}

void GroupProblem::set_base(int group, std::span<const double> base) {
  std::copy(base.begin(), base.end(), base_.begin() + group * dim_);
}

void GroupProblem::set_init(int group, std::span<const double> init) {
  std::copy(init.begin(), init.end(), init_.begin() + group * dim_);
}

void GroupProblem::add_rating(int group, std::span<const double> counterpart,
                              double rating) {
  ratings_.push_back({group, counterpart.data(), rating});
  has_terms_[group] = true;
}

void GroupProblem::add_user_pair(int group, std::span<const double> win,
                                 std::span<const double> lose) {
  user_pairs_.push_back({group, win.data(), lose.data()});
  has_terms_[group] = true;
}

void GroupProblem::add_item_pair(std::span<const double> user,
                                 PairEndpoint win, PairEndpoint lose) {
  if (win.group < 0 && lose.group < 0) return;  // constant term
  item_pairs_.push_back({user.data(), win, lose});
  if (win.group >= 0) has_terms_[win.group] = true;
  if (lose.group >= 0) has_terms_[lose.group] = true;
}

void GroupProblem::endpoint_vector(const PairEndpoint& e,
                                   std::span<const double> w,
                                   double* out) const {
  if (e.group < 0) {
    std::copy(e.fixed, e.fixed + dim_, out);
    return;
  }
  const std::size_t off = static_cast<std::size_t>(e.group) * dim_;
  for (int k = 0; k < dim_; ++k) out[k] = base_[off + k] + w[off + k];
}

double GroupProblem::objective(std::span<const double> w,
                               const SolverSettings& settings) const {
  const int d = dim_;
  double value = 0.0;
  for (const auto& t : ratings_) {
    const std::size_t off = static_cast<std::size_t>(t.group) * d;
    double pred = 0.0;
    for (int k = 0; k < d; ++k) {
      pred += (base_[off + k] + w[off + k]) * t.counterpart[k];
    }
    const double e = t.rating - pred;
    value += e * e;
  }
  if (settings.lambda_bpr != 0.0) {
    double bpr = 0.0;
    for (const auto& t : user_pairs_) {
      const std::size_t off = static_cast<std::size_t>(t.group) * d;
      double s = 0.0;
      for (int k = 0; k < d; ++k) {
        s += (base_[off + k] + w[off + k]) * (t.win[k] - t.lose[k]);
      }
      bpr += log_sigmoid(s);
    }
    std::vector<double> xw(d), xl(d);
    for (const auto& t : item_pairs_) {
      endpoint_vector(t.win, w, xw.data());
      endpoint_vector(t.lose, w, xl.data());
      double s = 0.0;
      for (int k = 0; k < d; ++k) s += t.user[k] * (xw[k] - xl[k]);
      bpr += log_sigmoid(s);
    }
    value -= settings.lambda_bpr * bpr;
  }
  double reg = 0.0;
  for (double v : w) reg += v * v;
  return value + settings.lambda_reg * reg;
}

GroupFit GroupProblem::solve(const SolverSettings& settings) const {
  const int d = dim_;
  std::vector<double> w = init_;
  if (settings.lambda_reg > 0.0) {
    // Regularizer-only groups are minimized exactly at zero.
    for (int g = 0; g < groups_; ++g) {
      if (!has_terms_[g]) {
        std::fill_n(w.begin() + static_cast<std::size_t>(g) * d, d, 0.0);
      }
    }
  }

  GroupFit fit;
  fit.initial_objective = objective(w, settings);
  if (!std::isfinite(fit.initial_objective)) throw DivergenceError(0);
  fit.objective = fit.initial_objective;
  fit.residuals = w;

  std::mt19937_64 rng(settings.seed);
  std::vector<std::size_t> order(ratings_.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const std::size_t num_pairs = user_pairs_.size() + item_pairs_.size();
  std::vector<std::size_t> pair_order(num_pairs);
  for (std::size_t i = 0; i < num_pairs; ++i) pair_order[i] = i;
  const bool use_pairs = settings.lambda_bpr != 0.0 && num_pairs > 0;
  const double shrink = 1.0 / (1.0 + 2.0 * settings.lr * settings.lambda_reg);
  std::vector<double> xw(d), xl(d);

  auto pair_step = [&](std::size_t p) {
    if (p < user_pairs_.size()) {
      const auto& t = user_pairs_[p];
      const std::size_t off = static_cast<std::size_t>(t.group) * d;
      double s = 0.0;
      for (int k = 0; k < d; ++k) {
        s += (base_[off + k] + w[off + k]) * (t.win[k] - t.lose[k]);
      }
      const double c = settings.lr * settings.lambda_bpr * sigmoid(-s);
      for (int k = 0; k < d; ++k) w[off + k] += c * (t.win[k] - t.lose[k]);
      return;
    }
    const auto& t = item_pairs_[p - user_pairs_.size()];
    endpoint_vector(t.win, w, xw.data());
    endpoint_vector(t.lose, w, xl.data());
    double s = 0.0;
    for (int k = 0; k < d; ++k) s += t.user[k] * (xw[k] - xl[k]);
    const double c = settings.lr * settings.lambda_bpr * sigmoid(-s);
    if (t.win.group >= 0) {
      const std::size_t off = static_cast<std::size_t>(t.win.group) * d;
      for (int k = 0; k < d; ++k) w[off + k] += c * t.user[k];
    }
    if (t.lose.group >= 0) {
      const std::size_t off = static_cast<std::size_t>(t.lose.group) * d;
      for (int k = 0; k < d; ++k) w[off + k] -= c * t.user[k];
    }
  };

  double previous = fit.initial_objective;
  for (int epoch = 1; epoch <= settings.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t idx : order) {
      const auto& t = ratings_[idx];
      const std::size_t off = static_cast<std::size_t>(t.group) * d;
      double pred = 0.0;
      for (int k = 0; k < d; ++k) {
        pred += (base_[off + k] + w[off + k]) * t.counterpart[k];
      }
      const double c = 2.0 * settings.lr * (t.rating - pred);
      for (int k = 0; k < d; ++k) w[off + k] += c * t.counterpart[k];
    }
    if (use_pairs) {
      if (settings.n_bpr == 0) {
        std::shuffle(pair_order.begin(), pair_order.end(), rng);
        for (std::size_t p : pair_order) pair_step(p);
      } else {
        std::uniform_int_distribution<std::size_t> pick(0, num_pairs - 1);
        for (int s = 0; s < settings.n_bpr; ++s) pair_step(pick(rng));
      }
    }
    if (settings.lambda_reg > 0.0) {
      // Proximal step on the L2 term; stable for any lambda.
      for (int g = 0; g < groups_; ++g) {
        if (!has_terms_[g]) continue;
        const std::size_t off = static_cast<std::size_t>(g) * d;
        for (int k = 0; k < d; ++k) w[off + k] *= shrink;
      }
    }

    const double value = objective(w, settings);
    fit.epochs_run = epoch;
    if (!std::isfinite(value)) throw DivergenceError(epoch);
    if (value < fit.objective) {
      fit.objective = value;
      fit.residuals = w;
      fit.best_epoch = epoch;
    }
    if (std::abs(previous - value) <=
        settings.tol * std::max(std::abs(previous),
                                std::numeric_limits<double>::min())) {
      break;
    }
    previous = value;
  }
  return fit;
}

FactorMatrix fit_factors(Side side, const FactorMatrix& counterpart,
                         const Interactions& data, const BprPairSet& pairs,
                         const Hyperparams& hp, const FactorMatrix& init) {
  const int rows = side == Side::kUser ? data.num_users : data.num_items;
  const int d = hp.dim;
  if (init.rows() != rows || init.dim() != d || counterpart.dim() != d) {
    throw ValidationError("factor dimensions do not agree");
  }
  GroupProblem problem(rows, d);
  for (int r = 0; r < rows; ++r) problem.set_init(r, init.row(r));
  const bool use_pairs = hp.lambda_b != 0.0;
  if (side == Side::kUser) {
    for (int u = 0; u < rows; ++u) {
      for (const auto& o : data.by_user[u]) {
        problem.add_rating(u, counterpart.row(o.other), o.rating);
      }
      if (use_pairs && u < static_cast<int>(pairs.size())) {
        for (const auto& p : pairs[u]) {
          problem.add_user_pair(u, counterpart.row(p.win),
                                counterpart.row(p.lose));
        }
      }
    }
  } else {
    for (int i = 0; i < rows; ++i) {
      for (const auto& o : data.by_item[i]) {
        problem.add_rating(i, counterpart.row(o.other), o.rating);
      }
    }
    if (use_pairs) {
      for (std::size_t u = 0; u < pairs.size(); ++u) {
        for (const auto& p : pairs[u]) {
          problem.add_item_pair(counterpart.row(static_cast<int>(u)),
                                {p.win, nullptr}, {p.lose, nullptr});
        }
      }
    }
  }
  const GroupFit fit = problem.solve(SolverSettings::from(hp, side));
  FactorMatrix out(rows, d);
  out.values() = fit.residuals;
  return out;
}

FlatFactors train_flat_mf(const Interactions& data, const BprPairSet& pairs,
                          const Hyperparams& hp) {
  hp.validate();
  FlatFactors out;
  out.users = FactorMatrix::uniform(data.num_users, hp.dim, hp.init_scale,
                                    derive_seed(hp.seed, 1));
  out.items = FactorMatrix::uniform(data.num_items, hp.dim, hp.init_scale,
                                    derive_seed(hp.seed, 2));
  Hyperparams round = hp;
  for (int r = 0; r < hp.mf_rounds; ++r) {
    round.seed = derive_seed(hp.seed, 100 + 2 * r);
    out.users = fit_factors(Side::kUser, out.items, data, pairs, round,
                            out.users);
    round.seed = derive_seed(hp.seed, 101 + 2 * r);
    out.items = fit_factors(Side::kItem, out.users, data, pairs, round,
                            out.items);
  }
  out.objective = objective(out.users, out.items, data.observations, pairs, hp);
  return out;
}

}  // namespace factree
