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

#ifndef FACTREE_CORE_EVAL_HPP_
#define FACTREE_CORE_EVAL_HPP_

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "core/config.hpp"
#include "core/dataset.hpp"
#include "core/model.hpp"

namespace factree {

// DCG uses gain / log2(rank + 1) with 1-based ranks; the ideal DCG sorts
// every gain in `relevance`. Returns 0 when nothing relevant is ranked.
double ndcg_at_k(std::span<const int> ranked,
                 const std::map<int, double>& relevance, int k);

enum class GainMode { kRating, kBinary };

class Ranker {
 public:
  virtual ~Ranker() = default;
  virtual std::string name() const = 0;
  // Top `k` items for a training user, skipping the sorted `exclude` list.
  virtual std::vector<int> rank(int user, int k,
                                std::span<const int> exclude) const = 0;
  // Objective reached in training, when the ranker has one.
  virtual std::optional<double> training_objective() const;
};

std::unique_ptr<Ranker> baseline_most_popular(const Dataset& train);
std::unique_ptr<Ranker> baseline_flat_mf(const Dataset& train, Hyperparams hp,
                                         bool with_bpr);
std::unique_ptr<Ranker> fact_ranker(FactModel model);

enum class Method { kFact, kMostPopular, kFlatMf, kBprMf };

const char* method_name(Method m);
Method parse_method(const std::string& name);

std::unique_ptr<Ranker> train_ranker(Method method, const Dataset& train,
                                     const TrainConfig& cfg);

struct EvalOptions {
  std::vector<int> ks{10, 20, 50, 100};
  GainMode gain = GainMode::kRating;
};

struct RankingScore {
  std::vector<double> ndcg;  // mean per cutoff
  int users = 0;             // users with at least one held-out item
};

// Mean NDCG over users with held-out reviews in `test`; items seen in
// `train` by the user are excluded from the ranking.
RankingScore evaluate_ranker(const Ranker& ranker, const Dataset& train,
                             std::span<const Review> test,
                             const EvalOptions& options);

struct ModelEvaluation {
  RankingScore score;
  int skipped_reviews = 0;  // user or item unknown to the model
};

// Scores a trained model on reviews from another file, matched by id; the
// model's training items are excluded per user.
ModelEvaluation evaluate_model(const FactModel& model, const Dataset& test,
                               const EvalOptions& options);

// Per review: fold index, or -1 for reviews of users with fewer
// observations than folds (kept in every training split).
struct FoldAssignment {
  std::vector<int> fold;
  int train_only_users = 0;
};

FoldAssignment assign_folds(const Dataset& ds, int folds, std::uint64_t seed);

struct CvReport {
  std::string method;
  std::vector<int> ks;
  std::vector<RankingScore> folds;
  std::vector<double> mean;
  std::vector<double> std;
  int train_only_users = 0;
  std::optional<double> objective;  // training objective of the first fold
};

// `max_folds` evaluates only the first folds of the partition.
CvReport cross_validate(const Dataset& ds, const TrainConfig& cfg,
                        Method method, int folds, const EvalOptions& options,
                        std::optional<int> max_folds = std::nullopt);

struct ColdStartReport {
  std::vector<int> k_values;
  std::vector<std::optional<double>> ndcg;  // empty cohort -> nullopt
  std::vector<int> users;                   // evaluated users per k
  std::vector<int> skipped;                 // users with <= k reviews
  int test_users = 0;
  int cutoff = 50;
};

struct ColdStartOptions {
  std::vector<int> k_values{0, 1, 2, 3, 4, 5};
  double test_fraction = 0.05;
  int cutoff = 50;
  GainMode gain = GainMode::kRating;
  std::uint64_t seed = 7;
};

ColdStartReport cold_start_eval(const Dataset& ds, const TrainConfig& cfg,
                                const ColdStartOptions& options = {});

// Cold-start evaluation against an already trained model on held-out users'
// reviews (ordered by timestamp).
ColdStartReport cold_start_eval_model(
    const FactModel& model, const std::vector<std::vector<Review>>& test_users,
    const ColdStartOptions& options);

enum class SweepAxis { kDepth, kLatentDim, kPhi, kNFeatures, kParentFactors };

const char* axis_name(SweepAxis axis);
SweepAxis parse_axis(const std::string& name);

// Lambda_b that yields relative BPR weight `phi`; a zero n_bpr counts one
// full pass over `total_pairs`.
double lambda_b_for_phi(const Hyperparams& hp, double phi, int num_users,
                        int num_items, std::size_t total_pairs);

// Returns the config (and dataset) for one sweep cell.
TrainConfig sweep_config(const TrainConfig& base, SweepAxis axis, double value,
                         const Dataset& ds);

struct SweepCell {
  double value = 0.0;
  std::vector<double> mean;
  std::vector<double> std;
  int folds = 0;
  std::optional<double> objective;  // training objective of the first fold
  std::string error;
};

struct SweepReport {
  std::string axis;
  std::vector<int> ks;
  std::vector<SweepCell> cells;
};

SweepReport sweep(const Dataset& ds, const TrainConfig& base, SweepAxis axis,
                  const std::vector<double>& values, int folds,
                  const EvalOptions& options,
                  std::optional<int> max_folds = std::nullopt);

std::string sweep_csv(const SweepReport& report);
nlohmann::json sweep_json(const SweepReport& report);
nlohmann::json cv_report_json(const CvReport& report);
nlohmann::json cold_start_json(const ColdStartReport& report);

GainMode parse_gain(const std::string& name);
const char* gain_name(GainMode mode);

struct SyntheticSpec {
  int users = 200;
  int items = 100;
  int user_clusters = 2;
  int item_clusters = 2;
  // [user cluster][item cluster]; empty means high on the diagonal
  // (scale max - 0.5) and low elsewhere (scale min + 0.5).
  std::vector<std::vector<double>> block_means;
  double noise = 0.3;
  int reviews_per_user = 12;
  int features_per_cluster = 2;
  int background_features = 2;
  // Chance that a review mentions each of the reviewer cluster's features.
  double planted_mention_prob = 0.8;
  // Chance of one extra mention of a random non-planted feature.
  double stray_mention_prob = 0.1;
  // Chance that a reviewed item comes from the user's favourite cluster.
  double affinity = 0.7;
  RatingScale scale;
  std::uint64_t seed = 1;

  void validate() const;
};

struct SyntheticData {
  Dataset dataset;
  std::vector<int> user_cluster;
  std::vector<int> item_cluster;
};

SyntheticData synth_generate(const SyntheticSpec& spec);

// Fields missing from `j` keep their defaults; unknown keys are rejected.
SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j);
nlohmann::json synthetic_spec_to_json(const SyntheticSpec& spec);

}  // namespace factree

#endif  // FACTREE_CORE_EVAL_HPP_
