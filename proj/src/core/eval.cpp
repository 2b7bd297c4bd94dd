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

#include "core/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include <spdlog/spdlog.h>

#include "core/error.hpp"
#include "core/recommend.hpp"

namespace factree {

using nlohmann::json;

double ndcg_at_k(std::span<const int> ranked,
                 const std::map<int, double>& relevance, int k) {
  if (k < 1) throw ValidationError("cutoff must be >= 1");
  if (relevance.empty()) throw ValidationError("relevance map is empty");
  double dcg = 0.0;
  const auto limit = std::min<std::size_t>(k, ranked.size());
  for (std::size_t r = 0; r < limit; ++r) {
    auto it = relevance.find(ranked[r]);
    if (it != relevance.end()) dcg += it->second / std::log2(r + 2.0);
  }
  std::vector<double> gains;
  for (const auto& [_, g] : relevance) gains.push_back(g);
  std::sort(gains.begin(), gains.end(), std::greater<>());
  double ideal = 0.0;
  for (std::size_t r = 0; r < gains.size() && r < static_cast<std::size_t>(k);
       ++r) {
    ideal += gains[r] / std::log2(r + 2.0);
  }
  return ideal > 0.0 ? dcg / ideal : 0.0;
}

namespace {

class MostPopularRanker : public Ranker {
 public:
  explicit MostPopularRanker(const Dataset& train) {
    std::vector<int> counts(train.num_items(), 0);
    for (const Review& r : train.reviews) ++counts[r.item];
    order_.resize(train.num_items());
    std::iota(order_.begin(), order_.end(), 0);
    std::stable_sort(order_.begin(), order_.end(),
                     [&](int a, int b) { return counts[a] > counts[b]; });
  }

  std::string name() const override { return "most-popular"; }

  std::vector<int> rank(int, int k, std::span<const int> exclude) const override {
    std::vector<int> out;
    for (int i : order_) {
      if (static_cast<int>(out.size()) >= k) break;
      if (!std::binary_search(exclude.begin(), exclude.end(), i)) {
        out.push_back(i);
      }
    }
    return out;
  }

 private:
  std::vector<int> order_;
};

class FactorRanker : public Ranker {
 public:
  FactorRanker(std::string name, FactorMatrix users, FactorMatrix items,
               std::optional<double> objective)
      : name_(std::move(name)),
        users_(std::move(users)),
        items_(std::move(items)),
        objective_(objective) {}

  std::string name() const override { return name_; }

  std::vector<int> rank(int user, int k,
                        std::span<const int> exclude) const override {
    std::vector<int> out;
    for (const auto& s : rank_items(items_, users_.row(user), k, exclude)) {
      out.push_back(s.item);
    }
    return out;
  }

  std::optional<double> training_objective() const override {
    return objective_;
  }

 private:
  std::string name_;
  FactorMatrix users_;
  FactorMatrix items_;
  std::optional<double> objective_;
};

std::vector<std::vector<int>> seen_by_user(const Dataset& ds) {
  std::vector<std::vector<int>> seen(ds.num_users());
  for (const Review& r : ds.reviews) seen[r.user].push_back(r.item);
  for (auto& s : seen) std::sort(s.begin(), s.end());
  return seen;
}

double gain_of(const Review& r, GainMode mode) {
  return mode == GainMode::kBinary ? 1.0 : r.rating;
}

void mean_and_std(const std::vector<double>& xs, double& mean, double& sd) {
  mean = 0.0;
  sd = 0.0;
  if (xs.empty()) return;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return;
  for (double x : xs) sd += (x - mean) * (x - mean);
  sd = std::sqrt(sd / static_cast<double>(xs.size() - 1));
}

}  // namespace

std::optional<double> Ranker::training_objective() const {
  return std::nullopt;
}

std::unique_ptr<Ranker> baseline_most_popular(const Dataset& train) {
  return std::make_unique<MostPopularRanker>(train);
}

std::unique_ptr<Ranker> baseline_flat_mf(const Dataset& train, Hyperparams hp,
                                         bool with_bpr) {
  if (!with_bpr) {
    hp.lambda_b = 0.0;
  } else if (!(hp.lambda_b > 0.0)) {
    throw ValidationError("BPR-MF needs lambda_b > 0");
  }
  if (train.reviews.empty()) {
    throw Error(ErrorCode::kEmptyDataset, "dataset has no observations");
  }
  const TrainingData data = TrainingData::build(train, hp);
  FlatFactors flat = train_flat_mf(data.interactions, data.pairs, hp);
  return std::make_unique<FactorRanker>(with_bpr ? "bpr-mf" : "mf",
                                        std::move(flat.users),
                                        std::move(flat.items), flat.objective);
}

std::unique_ptr<Ranker> fact_ranker(FactModel model) {
  std::optional<double> objective;
  if (!model.report.objectives.empty()) {
    objective = model.report.objectives.back();
  }
  return std::make_unique<FactorRanker>("fact", std::move(model.user_factors),
                                        std::move(model.item_factors),
                                        objective);
}

const char* method_name(Method m) {
  switch (m) {
    case Method::kFact:
      return "fact";
    case Method::kMostPopular:
      return "most-popular";
    case Method::kFlatMf:
      return "mf";
    case Method::kBprMf:
      return "bpr-mf";
  }
  return "?";
}

Method parse_method(const std::string& name) {
  if (name == "fact") return Method::kFact;
  if (name == "most-popular" || name == "mp") return Method::kMostPopular;
  if (name == "mf") return Method::kFlatMf;
  if (name == "bpr-mf" || name == "bprmf") return Method::kBprMf;
  throw ValidationError("unknown method '" + name +
                        "' (expected fact, most-popular, mf, bpr-mf)");
}

std::unique_ptr<Ranker> train_ranker(Method method, const Dataset& train,
                                     const TrainConfig& cfg) {
  switch (method) {
    case Method::kFact:
      return fact_ranker(alternate(train, cfg));
    case Method::kMostPopular:
      return baseline_most_popular(train);
    case Method::kFlatMf:
      return baseline_flat_mf(train, cfg.hp, false);
    case Method::kBprMf:
      return baseline_flat_mf(train, cfg.hp, true);
  }
  throw Error(ErrorCode::kInternal, "unhandled method");
}

namespace {

RankingScore score_ranking(const Ranker& ranker,
                           const std::vector<std::vector<int>>& seen,
                           std::span<const Review> test,
                           const EvalOptions& options) {
  if (options.ks.empty()) throw ValidationError("no cutoffs requested");
  for (int k : options.ks) {
    if (k < 1) throw ValidationError("cutoff must be >= 1");
  }
  const int max_k = *std::max_element(options.ks.begin(), options.ks.end());
  std::map<int, std::map<int, double>> relevance;
  for (const Review& r : test) {
    relevance[r.user][r.item] = gain_of(r, options.gain);
  }
  RankingScore score;
  score.ndcg.assign(options.ks.size(), 0.0);
  for (const auto& [user, rel] : relevance) {
    const auto ranked = ranker.rank(user, max_k, seen[user]);
    for (std::size_t c = 0; c < options.ks.size(); ++c) {
      score.ndcg[c] += ndcg_at_k(ranked, rel, options.ks[c]);
    }
    ++score.users;
  }
  if (score.users > 0) {
    for (double& v : score.ndcg) v /= score.users;
  }
  return score;
}

}  // namespace

RankingScore evaluate_ranker(const Ranker& ranker, const Dataset& train,
                             std::span<const Review> test,
                             const EvalOptions& options) {
  return score_ranking(ranker, seen_by_user(train), test, options);
}

ModelEvaluation evaluate_model(const FactModel& model, const Dataset& test,
                               const EvalOptions& options) {
  ModelEvaluation out;
  std::vector<Review> mapped;
  for (const Review& r : test.reviews) {
    const auto user = model.user_index(test.users[r.user]);
    const auto item = model.item_index(test.items[r.item]);
    if (!user || !item) {
      ++out.skipped_reviews;
      continue;
    }
    Review m = r;
    m.user = *user;
    m.item = *item;
    mapped.push_back(std::move(m));
  }
  const auto ranker = fact_ranker(model);
  out.score = score_ranking(*ranker, model.user_seen, mapped, options);
  return out;
}

FoldAssignment assign_folds(const Dataset& ds, int folds, std::uint64_t seed) {
  if (folds < 2) throw ValidationError("cross validation needs folds >= 2");
  FoldAssignment out;
  out.fold.assign(ds.reviews.size(), -1);
  std::vector<std::vector<int>> by_user(ds.num_users());
  for (std::size_t r = 0; r < ds.reviews.size(); ++r) {
    by_user[ds.reviews[r].user].push_back(static_cast<int>(r));
  }
  for (int u = 0; u < ds.num_users(); ++u) {
    auto& idx = by_user[u];
    if (idx.empty()) continue;
    if (static_cast<int>(idx.size()) < folds) {
      ++out.train_only_users;
      continue;
    }
    std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(u)));
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t p = 0; p < idx.size(); ++p) {
      out.fold[idx[p]] = static_cast<int>(p % folds);
    }
  }
  return out;
}

CvReport cross_validate(const Dataset& ds, const TrainConfig& cfg,
                        Method method, int folds, const EvalOptions& options,
                        std::optional<int> max_folds) {
  const FoldAssignment assignment = assign_folds(ds, folds, cfg.hp.seed);
  CvReport report;
  report.method = method_name(method);
  report.ks = options.ks;
  report.train_only_users = assignment.train_only_users;
  if (assignment.train_only_users > 0) {
    spdlog::warn("{} users have fewer than {} observations; kept train-only",
                 assignment.train_only_users, folds);
  }
  const int run = std::min(folds, max_folds.value_or(folds));
  for (int f = 0; f < run; ++f) {
    std::vector<Review> train;
    std::vector<Review> test;
    for (std::size_t r = 0; r < ds.reviews.size(); ++r) {
      (assignment.fold[r] == f ? test : train).push_back(ds.reviews[r]);
    }
    const Dataset train_ds = ds.with_reviews(std::move(train));
    const auto ranker = train_ranker(method, train_ds, cfg);
    if (f == 0) report.objective = ranker->training_objective();
    report.folds.push_back(evaluate_ranker(*ranker, train_ds, test, options));
    spdlog::info("fold {} {} ndcg@{} {:.4f}", f, report.method,
                 options.ks.front(), report.folds.back().ndcg.front());
  }
  report.mean.resize(options.ks.size());
  report.std.resize(options.ks.size());
  for (std::size_t c = 0; c < options.ks.size(); ++c) {
    std::vector<double> xs;
    for (const auto& fold : report.folds) xs.push_back(fold.ndcg[c]);
    mean_and_std(xs, report.mean[c], report.std[c]);
  }
  return report;
}

ColdStartReport cold_start_eval_model(
    const FactModel& model, const std::vector<std::vector<Review>>& test_users,
    const ColdStartOptions& options) {
  ColdStartReport report;
  report.k_values = options.k_values;
  report.cutoff = options.cutoff;
  report.test_users = static_cast<int>(test_users.size());
  if (options.k_values.empty()) return report;
  for (int k : options.k_values) {
    if (k < 0) throw ValidationError("k must be >= 0");
  }
  // Every k is scored on the same target (reviews after the first k_max)
  // and the same candidates, so only the revealed profile changes.
  const int k_max =
      *std::max_element(options.k_values.begin(), options.k_values.end());
  for (int k : options.k_values) {
    double total = 0.0;
    int users = 0;
    int skipped = 0;
    for (const auto& reviews : test_users) {
      if (static_cast<int>(reviews.size()) <= k_max) {
        ++skipped;
        continue;
      }
      const std::span<const Review> first(reviews.data(), k);
      const ResolvedUser user =
          resolve_profile(model, cold_start_profile(first));
      std::vector<int> exclude;
      for (int r = 0; r < k_max; ++r) exclude.push_back(reviews[r].item);
      std::sort(exclude.begin(), exclude.end());
      exclude.erase(std::unique(exclude.begin(), exclude.end()), exclude.end());
      std::map<int, double> relevance;
      for (std::size_t r = k_max; r < reviews.size(); ++r) {
        relevance[reviews[r].item] = gain_of(reviews[r], options.gain);
      }
      std::vector<int> ranked;
      for (const auto& s : rank_items(model.item_factors, user.factor,
                                      options.cutoff, exclude)) {
        ranked.push_back(s.item);
      }
      total += ndcg_at_k(ranked, relevance, options.cutoff);
      ++users;
    }
    report.users.push_back(users);
    report.skipped.push_back(skipped);
    report.ndcg.push_back(users > 0 ? std::optional<double>(total / users)
                                    : std::nullopt);
  }
  return report;
}

ColdStartReport cold_start_eval(const Dataset& ds, const TrainConfig& cfg,
                                const ColdStartOptions& options) {
  if (!(options.test_fraction > 0.0 && options.test_fraction < 1.0)) {
    throw ValidationError("test fraction must be in (0, 1)");
  }
  std::vector<int> order(ds.num_users());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(options.seed);
  std::shuffle(order.begin(), order.end(), rng);
  const int test_count = std::max(
      1, static_cast<int>(std::lround(options.test_fraction * ds.num_users())));
  if (test_count >= ds.num_users()) {
    throw ValidationError("not enough users for a cold-start split");
  }
  std::vector<bool> is_test(ds.num_users(), false);
  for (int i = 0; i < test_count; ++i) is_test[order[i]] = true;

  std::vector<Review> train;
  std::vector<std::vector<Review>> held(ds.num_users());
  for (const Review& r : ds.reviews) {
    (is_test[r.user] ? held[r.user] : train).push_back(r);
  }
  const Dataset train_ds = ds.with_reviews(std::move(train));
  std::vector<bool> trained_item(ds.num_items(), false);
  for (const Review& r : train_ds.reviews) trained_item[r.item] = true;

  const FactModel model = alternate(train_ds, cfg);
  std::vector<std::vector<Review>> test_users;
  for (int u = 0; u < ds.num_users(); ++u) {
    if (!is_test[u]) continue;
    auto reviews = held[u];
    std::stable_sort(reviews.begin(), reviews.end(),
                     [](const Review& a, const Review& b) { return a.ts < b.ts; });
    // Items never observed in training cannot be ranked meaningfully.
    std::erase_if(reviews, [&](const Review& r) { return !trained_item[r.item]; });
    test_users.push_back(std::move(reviews));
  }
  return cold_start_eval_model(model, test_users, options);
}

const char* axis_name(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::kDepth:
      return "depth";
    case SweepAxis::kLatentDim:
      return "latent_dim";
    case SweepAxis::kPhi:
      return "phi";
    case SweepAxis::kNFeatures:
      return "n_features";
    case SweepAxis::kParentFactors:
      return "parent_factors";
  }
  return "?";
}

SweepAxis parse_axis(const std::string& name) {
  for (SweepAxis a : {SweepAxis::kDepth, SweepAxis::kLatentDim, SweepAxis::kPhi,
                      SweepAxis::kNFeatures, SweepAxis::kParentFactors}) {
    if (name == axis_name(a)) return a;
  }
  throw ValidationError("unknown sweep axis '" + name +
                        "' (expected depth, latent_dim, phi, n_features, "
                        "parent_factors)");
}

double lambda_b_for_phi(const Hyperparams& hp, double phi, int num_users,
                        int num_items, std::size_t total_pairs) {
  if (phi < 0.0) throw ValidationError("phi must be >= 0");
  Hyperparams unit = hp;
  unit.lambda_b = 1.0;
  if (unit.n_bpr == 0) unit.n_bpr = static_cast<int>(total_pairs);
  const double per_unit = relative_bpr_weight(unit, num_users, num_items);
  if (!(per_unit > 0.0)) {
    throw ValidationError("phi is undefined without BPR steps");
  }
  return phi / per_unit;
}

namespace {

int integral(double value, const char* axis) {
  if (value != std::floor(value) || value < 0) {
    throw ValidationError(std::string(axis) + " values must be integers >= 0");
  }
  return static_cast<int>(value);
}

}  // namespace

TrainConfig sweep_config(const TrainConfig& base, SweepAxis axis, double value,
                         const Dataset& ds) {
  TrainConfig cfg = base;
  switch (axis) {
    case SweepAxis::kDepth:
      cfg.depth = integral(value, "depth");
      break;
    case SweepAxis::kLatentDim:
      cfg.hp.dim = integral(value, "latent_dim");
      break;
    case SweepAxis::kPhi: {
      const Interactions data = Interactions::from(ds);
      const BprPairSet pairs = build_all_bpr_pairs(
          data, cfg.hp.negatives_per_positive, derive_seed(cfg.hp.seed, 0x5eed));
      std::size_t total = 0;
      for (const auto& p : pairs) total += p.size();
      cfg.hp.lambda_b = lambda_b_for_phi(cfg.hp, value, ds.num_users(),
                                         ds.num_items(), total);
      break;
    }
    case SweepAxis::kNFeatures:
      integral(value, "n_features");
      break;
    case SweepAxis::kParentFactors:
      cfg.use_parent_factors = value != 0.0;
      break;
  }
  return cfg;
}

SweepReport sweep(const Dataset& ds, const TrainConfig& base, SweepAxis axis,
                  const std::vector<double>& values, int folds,
                  const EvalOptions& options, std::optional<int> max_folds) {
  SweepReport report;
  report.axis = axis_name(axis);
  report.ks = options.ks;
  for (double value : values) {
    SweepCell cell;
    cell.value = value;
    try {
      const Dataset data =
          axis == SweepAxis::kNFeatures
              ? truncate_features(ds, integral(value, "n_features"))
              : ds;
      const TrainConfig cfg = sweep_config(base, axis, value, data);
      const CvReport cv =
          cross_validate(data, cfg, Method::kFact, folds, options, max_folds);
      cell.mean = cv.mean;
      cell.std = cv.std;
      cell.folds = static_cast<int>(cv.folds.size());
      cell.objective = cv.objective;
    } catch (const std::exception& e) {
      cell.error = e.what();
      spdlog::warn("sweep {}={} failed: {}", report.axis, value, e.what());
    }
    report.cells.push_back(std::move(cell));
  }
  return report;
}

std::string sweep_csv(const SweepReport& report) {
  std::ostringstream out;
  out.precision(10);
  out << "axis,value,metric,mean,std,folds\n";
  for (const SweepCell& cell : report.cells) {
    if (!cell.error.empty()) {
      out << report.axis << ',' << cell.value << ",error,nan,nan,0\n";
      continue;
    }
    for (std::size_t c = 0; c < report.ks.size(); ++c) {
      out << report.axis << ',' << cell.value << ",ndcg@" << report.ks[c]
          << ',' << cell.mean[c] << ',' << cell.std[c] << ',' << cell.folds
          << '\n';
    }
    if (cell.objective) {
      out << report.axis << ',' << cell.value << ",objective,"
          << *cell.objective << ",0,1\n";
    }
  }
  return out.str();
}

json sweep_json(const SweepReport& report) {
  json cells = json::array();
  for (const SweepCell& cell : report.cells) {
    json c = {{"value", cell.value}, {"folds", cell.folds}};
    if (!cell.error.empty()) {
      c["error"] = cell.error;
    } else {
      json metrics = json::object();
      for (std::size_t k = 0; k < report.ks.size(); ++k) {
        metrics["ndcg@" + std::to_string(report.ks[k])] = {
            {"mean", cell.mean[k]}, {"std", cell.std[k]}};
      }
      c["metrics"] = std::move(metrics);
      c["objective"] = cell.objective ? json(*cell.objective) : json(nullptr);
    }
    cells.push_back(std::move(c));
  }
  return {{"axis", report.axis}, {"ks", report.ks}, {"cells", std::move(cells)}};
}

void SyntheticSpec::validate() const {
  if (users < 1 || items < 1) throw ValidationError("need users and items");
  if (user_clusters < 1 || item_clusters < 1 || user_clusters > users ||
      item_clusters > items) {
    throw ValidationError("cluster counts must be in [1, entity count]");
  }
  if (!block_means.empty()) {
    if (static_cast<int>(block_means.size()) != user_clusters) {
      throw ValidationError("block_means needs one row per user cluster");
    }
    for (const auto& row : block_means) {
      if (static_cast<int>(row.size()) != item_clusters) {
        throw ValidationError("block_means needs one column per item cluster");
      }
    }
  }
  if (noise < 0.0) throw ValidationError("noise must be >= 0");
  if (reviews_per_user < 1 || reviews_per_user > items) {
    throw ValidationError("reviews_per_user must be in [1, items]");
  }
  if (features_per_cluster < 1 || background_features < 0) {
    throw ValidationError("feature counts must be positive");
  }
  for (double p : {planted_mention_prob, stray_mention_prob, affinity}) {
    if (p < 0.0 || p > 1.0) throw ValidationError("probabilities in [0, 1]");
  }
}

namespace {

std::string padded(char prefix, int value, int total) {
  const int width = static_cast<int>(std::to_string(std::max(total - 1, 0)).size());
  std::string digits = std::to_string(value);
  return prefix + std::string(std::max(0, width - static_cast<int>(digits.size())), '0') +
         digits;
}

std::vector<int> balanced_labels(int count, int clusters, std::mt19937_64& rng) {
  std::vector<int> labels(count);
  for (int i = 0; i < count; ++i) labels[i] = i % clusters;
  std::shuffle(labels.begin(), labels.end(), rng);
  return labels;
}

}  // namespace

SyntheticData synth_generate(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  auto means = spec.block_means;
  if (means.empty()) {
    means.assign(spec.user_clusters,
                 std::vector<double>(spec.item_clusters, spec.scale.min + 0.5));
    for (int c = 0; c < std::min(spec.user_clusters, spec.item_clusters); ++c) {
      means[c][c] = spec.scale.max - 0.5;
    }
  }
  const double mid = 0.5 * (spec.scale.min + spec.scale.max);
  const int groups = std::max(spec.user_clusters, spec.item_clusters);
  const int planted = groups * spec.features_per_cluster;
  const int num_features = planted + spec.background_features;

  SyntheticData out;
  Dataset& ds = out.dataset;
  ds.scale = spec.scale;
  for (int u = 0; u < spec.users; ++u) ds.users.push_back(padded('u', u, spec.users));
  for (int i = 0; i < spec.items; ++i) ds.items.push_back(padded('i', i, spec.items));
  for (int f = 0; f < num_features; ++f) {
    ds.features.push_back(padded('f', f, num_features));
  }
  out.user_cluster = balanced_labels(spec.users, spec.user_clusters, rng);
  out.item_cluster = balanced_labels(spec.items, spec.item_clusters, rng);

  std::vector<std::vector<int>> cluster_items(spec.item_clusters);
  for (int i = 0; i < spec.items; ++i) {
    cluster_items[out.item_cluster[i]].push_back(i);
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  for (int u = 0; u < spec.users; ++u) {
    const int c = out.user_cluster[u];
    const int favourite = static_cast<int>(
        std::max_element(means[c].begin(), means[c].end()) - means[c].begin());
    std::vector<bool> taken(spec.items, false);
    std::vector<int> chosen;
    while (static_cast<int>(chosen.size()) < spec.reviews_per_user) {
      const auto& pool = unit(rng) < spec.affinity ? cluster_items[favourite]
                                                   : std::vector<int>{};
      std::vector<int> open;
      if (!pool.empty()) {
        for (int i : pool) {
          if (!taken[i]) open.push_back(i);
        }
      }
      if (open.empty()) {
        for (int i = 0; i < spec.items; ++i) {
          if (!taken[i]) open.push_back(i);
        }
      }
      std::uniform_int_distribution<std::size_t> pick(0, open.size() - 1);
      const int item = open[pick(rng)];
      taken[item] = true;
      chosen.push_back(item);
    }
    std::int64_t ts = 0;
    for (int item : chosen) {
      const int g = out.item_cluster[item];
      Review r;
      r.user = u;
      r.item = item;
      r.ts = ++ts;
      r.rating = std::clamp(means[c][g] + spec.noise * gauss(rng),
                            spec.scale.min, spec.scale.max);
      const int polarity = means[c][g] >= mid ? 1 : -1;
      for (int k = 0; k < spec.features_per_cluster; ++k) {
        if (unit(rng) < spec.planted_mention_prob) {
          r.mentions.push_back({c * spec.features_per_cluster + k, polarity, {}});
        }
      }
      if (unit(rng) < spec.stray_mention_prob) {
        const int lo = spec.background_features > 0 ? planted : 0;
        std::uniform_int_distribution<int> feature(lo, num_features - 1);
        r.mentions.push_back({feature(rng), unit(rng) < 0.5 ? 1 : -1, {}});
      }
      ds.reviews.push_back(std::move(r));
    }
  }
  std::sort(ds.reviews.begin(), ds.reviews.end(),
            [](const Review& a, const Review& b) {
              if (a.user != b.user) return a.user < b.user;
              if (a.ts != b.ts) return a.ts < b.ts;
              return a.item < b.item;
            });
  return out;
}

}  // namespace factree

namespace factree {

GainMode parse_gain(const std::string& name) {
  if (name == "rating") return GainMode::kRating;
  if (name == "binary") return GainMode::kBinary;
  throw ValidationError("unknown gain mode '" + name + "'");
}

const char* gain_name(GainMode mode) {
  return mode == GainMode::kBinary ? "binary" : "rating";
}

json cv_report_json(const CvReport& report) {
  json folds = json::array();
  for (const RankingScore& f : report.folds) {
    folds.push_back({{"ndcg", f.ndcg}, {"users", f.users}});
  }
  json metrics = json::object();
  for (std::size_t k = 0; k < report.ks.size(); ++k) {
    metrics["ndcg@" + std::to_string(report.ks[k])] = {
        {"mean", report.mean[k]}, {"std", report.std[k]}};
  }
  return {{"method", report.method},
          {"ks", report.ks},
          {"metrics", std::move(metrics)},
          {"folds", std::move(folds)},
          {"train_only_users", report.train_only_users},
          {"objective",
           report.objective ? json(*report.objective) : json(nullptr)}};
}

json cold_start_json(const ColdStartReport& report) {
  json points = json::array();
  for (std::size_t i = 0; i < report.k_values.size(); ++i) {
    points.push_back(
        {{"k", report.k_values[i]},
         {"ndcg", report.ndcg[i] ? json(*report.ndcg[i]) : json(nullptr)},
         {"users", report.users[i]},
         {"skipped", report.skipped[i]}});
  }
  return {{"cutoff", report.cutoff},
          {"test_users", report.test_users},
          {"points", std::move(points)}};
}

SyntheticSpec synthetic_spec_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("synthetic spec must be an object");
  SyntheticSpec spec;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "users") spec.users = value.get<int>();
      else if (key == "items") spec.items = value.get<int>();
      else if (key == "user_clusters") spec.user_clusters = value.get<int>();
      else if (key == "item_clusters") spec.item_clusters = value.get<int>();
      else if (key == "block_means")
        spec.block_means = value.get<std::vector<std::vector<double>>>();
      else if (key == "noise") spec.noise = value.get<double>();
      else if (key == "reviews_per_user") spec.reviews_per_user = value.get<int>();
      else if (key == "features_per_cluster")
        spec.features_per_cluster = value.get<int>();
      else if (key == "background_features")
        spec.background_features = value.get<int>();
      else if (key == "planted_mention_prob")
        spec.planted_mention_prob = value.get<double>();
      else if (key == "stray_mention_prob")
        spec.stray_mention_prob = value.get<double>();
      else if (key == "affinity") spec.affinity = value.get<double>();
      else if (key == "scale") {
        const auto bounds = value.get<std::vector<double>>();
        if (bounds.size() != 2) throw ValidationError("scale is [min, max]");
        spec.scale.min = bounds[0];
        spec.scale.max = bounds[1];
      } else if (key == "seed") spec.seed = value.get<std::uint64_t>();
      else throw ValidationError("unknown synthetic spec key '" + key + "'");
    } catch (const json::exception& e) {
      throw ValidationError("synthetic spec key '" + key + "': " + e.what());
    }
  }
  spec.validate();
  return spec;
}

json synthetic_spec_to_json(const SyntheticSpec& spec) {
  return {{"users", spec.users},
          {"items", spec.items},
          {"user_clusters", spec.user_clusters},
          {"item_clusters", spec.item_clusters},
          {"block_means", spec.block_means},
          {"noise", spec.noise},
          {"reviews_per_user", spec.reviews_per_user},
          {"features_per_cluster", spec.features_per_cluster},
          {"background_features", spec.background_features},
          {"planted_mention_prob", spec.planted_mention_prob},
          {"stray_mention_prob", spec.stray_mention_prob},
          {"affinity", spec.affinity},
          {"scale", {spec.scale.min, spec.scale.max}},
          {"seed", spec.seed}};
}

}  // namespace factree
