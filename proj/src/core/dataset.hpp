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

#ifndef FACTREE_CORE_DATASET_HPP_
#define FACTREE_CORE_DATASET_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace factree {

enum class Side { kUser, kItem };

const char* side_name(Side side);

struct SentimentMention {
  int feature = 0;
  int polarity = 1;  // +1 or -1
  std::string opinion;

  bool operator==(const SentimentMention&) const = default;
};

struct Review {
  int user = 0;
  int item = 0;
  double rating = 0.0;
  std::int64_t ts = 0;
  std::vector<SentimentMention> mentions;

  bool operator==(const Review&) const = default;
};

struct RatingScale {
  double min = 1.0;
  double max = 5.0;

  bool contains(double r) const { return r >= min && r <= max; }
};

// Sparse feature vector. A feature that is absent is unknown, which is not
// the same thing as a stored 0.
class FeatureProfile {
 public:
  FeatureProfile() = default;
  explicit FeatureProfile(Side side) : side_(side) {}

  Side side() const { return side_; }

  std::optional<double> get(int feature) const;
  bool contains(int feature) const { return get(feature).has_value(); }
  void set(int feature, double value);

  const std::vector<std::pair<int, double>>& entries() const {
    return entries_;
  }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  // Total mention count (positive + negative) the values were built from.
  double total_mentions() const { return total_mentions_; }
  void set_total_mentions(double total) { total_mentions_ = total; }

  bool operator==(const FeatureProfile& other) const = default;

 private:
  Side side_ = Side::kUser;
  std::vector<std::pair<int, double>> entries_;  // sorted by feature
  double total_mentions_ = 0.0;
};

using ProfileSet = std::vector<FeatureProfile>;

struct Dataset {
  std::vector<std::string> users;
  std::vector<std::string> items;
  std::vector<std::string> features;
  // One review per (user, item) pair, ordered by (user, ts, item).
  std::vector<Review> reviews;
  RatingScale scale;

  int num_users() const { return static_cast<int>(users.size()); }
  int num_items() const { return static_cast<int>(items.size()); }
  int num_features() const { return static_cast<int>(features.size()); }

  std::optional<int> user_index(const std::string& name) const;
  std::optional<int> item_index(const std::string& name) const;
  std::optional<int> feature_index(const std::string& name) const;

  // Same entity and feature index space, different review subset.
  Dataset with_reviews(std::vector<Review> subset) const;

  bool operator==(const Dataset& other) const;
};

enum class NormalizationMode { kNone, kPerEntityTotal };

const char* normalization_name(NormalizationMode mode);
NormalizationMode parse_normalization(const std::string& name);

// Per-feature candidate thresholds for both sides.
struct DiscretizationSpec {
  std::vector<std::vector<double>> user_thresholds;
  std::vector<std::vector<double>> item_thresholds;
  NormalizationMode mode = NormalizationMode::kPerEntityTotal;
  int bins = 10;

  const std::vector<std::vector<double>>& thresholds(Side side) const {
    return side == Side::kUser ? user_thresholds : item_thresholds;
  }
};

struct ParseOptions {
  RatingScale scale;
  // When set, the vocabulary is fixed to these names and mentions of other
  // features are dropped.
  std::optional<std::vector<std::string>> vocabulary;
};

Dataset parse_dataset(std::istream& in, const ParseOptions& options = {});
Dataset parse_dataset(const std::filesystem::path& path,
                      const ParseOptions& options = {});
std::vector<std::string> load_vocabulary(const std::filesystem::path& path);

// Writes the JSON-lines review format that parse_dataset reads.
void write_dataset(std::ostream& out, const Dataset& ds);

// Raw per-entity profiles: users F = p + n, items F = p - n.
FeatureProfile profile_from_reviews(Side side,
                                    const std::vector<const Review*>& reviews);
ProfileSet build_user_profiles(const Dataset& ds);
ProfileSet build_item_profiles(const Dataset& ds);

FeatureProfile normalize_profile(const FeatureProfile& profile,
                                 NormalizationMode mode);
ProfileSet normalize_profiles(const ProfileSet& profiles,
                              NormalizationMode mode);

// Candidate thresholds for one feature from its known values.
std::vector<double> feature_thresholds(std::vector<double> values, int bins);
std::vector<std::vector<double>> candidate_thresholds(
    const ProfileSet& profiles, int num_features, int bins);
DiscretizationSpec build_discretization(const ProfileSet& user_profiles,
                                        const ProfileSet& item_profiles,
                                        int num_features, int bins,
                                        NormalizationMode mode);

struct FilterThresholds {
  int min_feature_freq = 0;
  int min_mentions_per_review = 0;
  int min_reviews_per_user = 0;
  int min_reviews_per_item = 0;
};

// Recursive filtering to a fixed point. Throws kEmptyDataset when nothing
// survives.
Dataset filter_dataset(const Dataset& ds, const FilterThresholds& thresholds);

// Keeps the `count` most frequently mentioned features (ties by id).
Dataset truncate_features(const Dataset& ds, int count);

}  // namespace factree

#endif  // FACTREE_CORE_DATASET_HPP_
