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

#include "core/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

#include "core/error.hpp"

namespace factree {

using nlohmann::json;

const char* side_name(Side side) {
  return side == Side::kUser ? "user" : "item";
}

const char* normalization_name(NormalizationMode mode) {
  return mode == NormalizationMode::kNone ? "none" : "per-entity-total";
}

NormalizationMode parse_normalization(const std::string& name) {
  if (name == "none") return NormalizationMode::kNone;
  if (name == "per-entity-total") return NormalizationMode::kPerEntityTotal;
  throw ValidationError("unknown normalization mode '" + name + "'");
}

std::optional<double> FeatureProfile::get(int feature) const {
  auto it = std::lower_bound(
      entries_.begin(), entries_.end(), feature,
      [](const std::pair<int, double>& e, int f) { return e.first < f; });
  if (it == entries_.end() || it->first != feature) return std::nullopt;
  return it->second;
}

void FeatureProfile::set(int feature, double value) {
  auto it = std::lower_bound(
      entries_.begin(), entries_.end(), feature,
      [](const std::pair<int, double>& e, int f) { return e.first < f; });
  if (it != entries_.end() && it->first == feature) {
    it->second = value;
  } else {
    entries_.insert(it, {feature, value});
  }
}

namespace {

std::optional<int> find_name(const std::vector<std::string>& names,
                             const std::string& name) {
  auto it = std::lower_bound(names.begin(), names.end(), name);
  if (it == names.end() || *it != name) return std::nullopt;
  return static_cast<int>(it - names.begin());
}

bool review_order(const Review& a, const Review& b) {
  if (a.user != b.user) return a.user < b.user;
  if (a.ts != b.ts) return a.ts < b.ts;
  return a.item < b.item;
}

struct RawMention {
  std::string feature;
  int polarity;
  std::string opinion;
};

struct RawReview {
  std::string user;
  std::string item;
  double rating;
  std::int64_t ts;
  std::vector<RawMention> mentions;
  std::size_t line;
};

RawReview parse_line(const std::string& text, std::size_t line) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(line, std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError(line, "review must be a JSON object");
  auto require = [&](const char* key) -> const json& {
    auto it = j.find(key);
    if (it == j.end()) {
      throw ParseError(line, std::string("missing field '") + key + "'");
    }
    return *it;
  };
  RawReview r;
  r.line = line;
  const json& user = require("user");
  const json& item = require("item");
  const json& rating = require("rating");
  if (!user.is_string() || !item.is_string()) {
    throw ParseError(line, "'user' and 'item' must be strings");
  }
  if (!rating.is_number()) throw ParseError(line, "'rating' must be a number");
  r.user = user.get<std::string>();
  r.item = item.get<std::string>();
  r.rating = rating.get<double>();
  r.ts = static_cast<std::int64_t>(line);
  if (auto it = j.find("ts"); it != j.end()) {
    if (!it->is_number_integer()) {
      throw ParseError(line, "'ts' must be an integer");
    }
    r.ts = it->get<std::int64_t>();
  }
  if (auto it = j.find("mentions"); it != j.end()) {
    if (!it->is_array()) throw ParseError(line, "'mentions' must be an array");
    for (const json& m : *it) {
      if (!m.is_object() || !m.contains("feature") || !m.contains("polarity")) {
        throw ParseError(line, "mention needs 'feature' and 'polarity'");
      }
      if (!m["feature"].is_string()) {
        throw ParseError(line, "mention 'feature' must be a string");
      }
      const json& pol = m["polarity"];
      if (!pol.is_number_integer() ||
          (pol.get<int>() != 1 && pol.get<int>() != -1)) {
        throw ValidationError("line " + std::to_string(line) +
                              ": polarity must be 1 or -1, got " + pol.dump());
      }
      RawMention rm{m["feature"].get<std::string>(), pol.get<int>(), {}};
      if (auto o = m.find("opinion"); o != m.end() && o->is_string()) {
        rm.opinion = o->get<std::string>();
      }
      r.mentions.push_back(std::move(rm));
    }
  }
  return r;
}

}  // namespace

std::optional<int> Dataset::user_index(const std::string& name) const {
  return find_name(users, name);
}
std::optional<int> Dataset::item_index(const std::string& name) const {
  return find_name(items, name);
}
std::optional<int> Dataset::feature_index(const std::string& name) const {
  return find_name(features, name);
}

Dataset Dataset::with_reviews(std::vector<Review> subset) const {
  Dataset out;
  out.users = users;
  out.items = items;
  out.features = features;
  out.scale = scale;
  out.reviews = std::move(subset);
  std::sort(out.reviews.begin(), out.reviews.end(), review_order);
  return out;
}

bool Dataset::operator==(const Dataset& other) const {
  return users == other.users && items == other.items &&
         features == other.features && reviews == other.reviews &&
         scale.min == other.scale.min && scale.max == other.scale.max;
}

Dataset parse_dataset(std::istream& in, const ParseOptions& options) {
  std::vector<RawReview> raw;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    RawReview r = parse_line(text, line);
    if (!options.scale.contains(r.rating)) {
      throw ValidationError("line " + std::to_string(line) + ": rating " +
                            std::to_string(r.rating) + " outside scale [" +
                            std::to_string(options.scale.min) + ", " +
                            std::to_string(options.scale.max) + "]");
    }
    raw.push_back(std::move(r));
  }

  // Latest timestamp wins per (user, item); later lines win ties.
  std::map<std::pair<std::string, std::string>, std::size_t> latest;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    auto key = std::make_pair(raw[i].user, raw[i].item);
    auto [it, inserted] = latest.emplace(key, i);
    if (!inserted && raw[i].ts >= raw[it->second].ts) it->second = i;
  }

  std::set<std::string> users, items, features;
  for (const auto& [key, idx] : latest) {
    users.insert(key.first);
    items.insert(key.second);
    if (!options.vocabulary) {
      for (const auto& m : raw[idx].mentions) features.insert(m.feature);
    }
  }
  if (options.vocabulary) {
    features.insert(options.vocabulary->begin(), options.vocabulary->end());
  }

  Dataset ds;
  ds.scale = options.scale;
  ds.users.assign(users.begin(), users.end());
  ds.items.assign(items.begin(), items.end());
  ds.features.assign(features.begin(), features.end());
  for (const auto& [key, idx] : latest) {
    const RawReview& r = raw[idx];
    Review out;
    out.user = *ds.user_index(r.user);
    out.item = *ds.item_index(r.item);
    out.rating = r.rating;
    out.ts = r.ts;
    for (const auto& m : r.mentions) {
      auto f = ds.feature_index(m.feature);
      if (!f) continue;  // outside a fixed vocabulary
      out.mentions.push_back({*f, m.polarity, m.opinion});
    }
    ds.reviews.push_back(std::move(out));
  }
  std::sort(ds.reviews.begin(), ds.reviews.end(), review_order);
  return ds;
}

Dataset parse_dataset(const std::filesystem::path& path,
                      const ParseOptions& options) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return parse_dataset(in, options);
}

std::vector<std::string> load_vocabulary(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(1, std::string("malformed vocabulary: ") + e.what());
  }
  if (!j.is_array()) throw ValidationError("vocabulary must be a JSON array");
  std::vector<std::string> out;
  for (const json& v : j) {
    if (!v.is_string()) throw ValidationError("vocabulary entries are strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

void write_dataset(std::ostream& out, const Dataset& ds) {
  for (const Review& r : ds.reviews) {
    json j;
    j["user"] = ds.users[r.user];
    j["item"] = ds.items[r.item];
    j["rating"] = r.rating;
    j["ts"] = r.ts;
    json mentions = json::array();
    for (const auto& m : r.mentions) {
      json jm{{"feature", ds.features[m.feature]}, {"polarity", m.polarity}};
      if (!m.opinion.empty()) jm["opinion"] = m.opinion;
      mentions.push_back(std::move(jm));
    }
    j["mentions"] = std::move(mentions);
    out << j.dump() << '\n';
  }
}

FeatureProfile profile_from_reviews(Side side,
                                    const std::vector<const Review*>& reviews) {
  std::map<int, std::pair<int, int>> counts;  // feature -> (pos, neg)
  double total = 0.0;
  for (const Review* r : reviews) {
    for (const auto& m : r->mentions) {
      auto& c = counts[m.feature];
      (m.polarity > 0 ? c.first : c.second) += 1;
      total += 1.0;
    }
  }
  FeatureProfile profile(side);
  for (const auto& [f, c] : counts) {
    double value = side == Side::kUser ? c.first + c.second
                                       : c.first - c.second;
    profile.set(f, value);
  }
  profile.set_total_mentions(total);
  return profile;
}

namespace {

ProfileSet build_profiles(const Dataset& ds, Side side) {
  const int count = side == Side::kUser ? ds.num_users() : ds.num_items();
  std::vector<std::vector<const Review*>> grouped(count);
  for (const Review& r : ds.reviews) {
    grouped[side == Side::kUser ? r.user : r.item].push_back(&r);
  }
  ProfileSet out;
  out.reserve(count);
  for (const auto& g : grouped) out.push_back(profile_from_reviews(side, g));
  return out;
}

}  // namespace

ProfileSet build_user_profiles(const Dataset& ds) {
  return build_profiles(ds, Side::kUser);
}

ProfileSet build_item_profiles(const Dataset& ds) {
  return build_profiles(ds, Side::kItem);
}

FeatureProfile normalize_profile(const FeatureProfile& profile,
                                 NormalizationMode mode) {
  if (mode == NormalizationMode::kNone || profile.empty()) return profile;
  const double total = profile.total_mentions();
  if (!(total > 0.0)) {
    throw Error(ErrorCode::kInternal,
                "profile has known features but zero mention total");
  }
  FeatureProfile out(profile.side());
  for (const auto& [f, v] : profile.entries()) out.set(f, v / total);
  out.set_total_mentions(total);
  return out;
}

ProfileSet normalize_profiles(const ProfileSet& profiles,
                              NormalizationMode mode) {
  ProfileSet out;
  out.reserve(profiles.size());
  for (const auto& p : profiles) out.push_back(normalize_profile(p, mode));
  return out;
}

std::vector<double> feature_thresholds(std::vector<double> values, int bins) {
  if (bins < 1) throw ValidationError("bins must be >= 1");
  if (values.empty()) return {};
  std::sort(values.begin(), values.end());
  std::vector<double> distinct;
  std::vector<std::size_t> count_upto;  // values <= distinct[i]
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (distinct.empty() || values[i] != distinct.back()) {
      distinct.push_back(values[i]);
      count_upto.push_back(0);
    }
    count_upto.back() = i + 1;
  }
  if (distinct.size() == 1) return {distinct.front()};

  std::vector<double> midpoints;
  for (std::size_t i = 0; i + 1 < distinct.size(); ++i) {
    midpoints.push_back(0.5 * (distinct[i] + distinct[i + 1]));
  }
  if (midpoints.size() <= static_cast<std::size_t>(bins)) return midpoints;

  // Equal-frequency selection: midpoint whose lower mass is closest to each
  // q/(bins+1) quantile.
  const double n = static_cast<double>(values.size());
  std::set<std::size_t> chosen;
  for (int q = 1; q <= bins; ++q) {
    const double target = q * n / (bins + 1.0);
    std::size_t best = 0;
    double best_gap = std::abs(static_cast<double>(count_upto[0]) - target);
    for (std::size_t i = 1; i < midpoints.size(); ++i) {
      const double gap = std::abs(static_cast<double>(count_upto[i]) - target);
      if (gap < best_gap) {
        best = i;
        best_gap = gap;
      }
    }
    chosen.insert(best);
  }
  std::vector<double> out;
  for (std::size_t i : chosen) out.push_back(midpoints[i]);
  return out;
}

std::vector<std::vector<double>> candidate_thresholds(
    const ProfileSet& profiles, int num_features, int bins) {
  std::vector<std::vector<double>> values(num_features);
  for (const auto& p : profiles) {
    for (const auto& [f, v] : p.entries()) values[f].push_back(v);
  }
  std::vector<std::vector<double>> out(num_features);
  for (int f = 0; f < num_features; ++f) {
    out[f] = feature_thresholds(std::move(values[f]), bins);
  }
  return out;
}

DiscretizationSpec build_discretization(const ProfileSet& user_profiles,
                                        const ProfileSet& item_profiles,
                                        int num_features, int bins,
                                        NormalizationMode mode) {
  DiscretizationSpec spec;
  spec.mode = mode;
  spec.bins = bins;
  spec.user_thresholds = candidate_thresholds(user_profiles, num_features, bins);
  spec.item_thresholds = candidate_thresholds(item_profiles, num_features, bins);
  return spec;
}

namespace {

Dataset compact(const Dataset& ds, const std::vector<bool>& keep_user,
                const std::vector<bool>& keep_item,
                const std::vector<bool>& keep_feature,
                const std::vector<Review>& reviews) {
  auto remap = [](const std::vector<bool>& keep) {
    std::vector<int> map(keep.size(), -1);
    int next = 0;
    for (std::size_t i = 0; i < keep.size(); ++i) {
      if (keep[i]) map[i] = next++;
    }
    return map;
  };
  const auto user_map = remap(keep_user);
  const auto item_map = remap(keep_item);
  const auto feature_map = remap(keep_feature);
  Dataset out;
  out.scale = ds.scale;
  for (int u = 0; u < ds.num_users(); ++u) {
    if (keep_user[u]) out.users.push_back(ds.users[u]);
  }
  for (int i = 0; i < ds.num_items(); ++i) {
    if (keep_item[i]) out.items.push_back(ds.items[i]);
  }
  for (int f = 0; f < ds.num_features(); ++f) {
    if (keep_feature[f]) out.features.push_back(ds.features[f]);
  }
  for (const Review& r : reviews) {
    Review c = r;
    c.user = user_map[r.user];
    c.item = item_map[r.item];
    c.mentions.clear();
    for (const auto& m : r.mentions) {
      if (feature_map[m.feature] >= 0) {
        c.mentions.push_back({feature_map[m.feature], m.polarity, m.opinion});
      }
    }
    out.reviews.push_back(std::move(c));
  }
  std::sort(out.reviews.begin(), out.reviews.end(), review_order);
  return out;
}

}  // namespace

Dataset filter_dataset(const Dataset& ds, const FilterThresholds& t) {
  if (t.min_feature_freq < 0 || t.min_mentions_per_review < 0 ||
      t.min_reviews_per_user < 0 || t.min_reviews_per_item < 0) {
    throw ValidationError("filter thresholds must be >= 0");
  }
  std::vector<bool> keep_user(ds.num_users(), true);
  std::vector<bool> keep_item(ds.num_items(), true);
  std::vector<bool> keep_feature(ds.num_features(), true);
  std::vector<Review> reviews = ds.reviews;

  bool changed = true;
  while (changed) {
    changed = false;

    std::vector<int> freq(ds.num_features(), 0);
    for (const Review& r : reviews) {
      for (const auto& m : r.mentions) ++freq[m.feature];
    }
    for (int f = 0; f < ds.num_features(); ++f) {
      if (keep_feature[f] && freq[f] < t.min_feature_freq) {
        keep_feature[f] = false;
        changed = true;
      }
    }
    for (Review& r : reviews) {
      std::erase_if(r.mentions, [&](const SentimentMention& m) {
        return !keep_feature[m.feature];
      });
    }

    const std::size_t before = reviews.size();
    std::erase_if(reviews, [&](const Review& r) {
      return static_cast<int>(r.mentions.size()) < t.min_mentions_per_review;
    });

    std::vector<int> per_user(ds.num_users(), 0);
    for (const Review& r : reviews) ++per_user[r.user];
    for (int u = 0; u < ds.num_users(); ++u) {
      if (keep_user[u] && per_user[u] < t.min_reviews_per_user) {
        keep_user[u] = false;
        changed = true;
      }
    }
    std::erase_if(reviews, [&](const Review& r) { return !keep_user[r.user]; });

    std::vector<int> per_item(ds.num_items(), 0);
    for (const Review& r : reviews) ++per_item[r.item];
    for (int i = 0; i < ds.num_items(); ++i) {
      if (keep_item[i] && per_item[i] < t.min_reviews_per_item) {
        keep_item[i] = false;
        changed = true;
      }
    }
    std::erase_if(reviews, [&](const Review& r) { return !keep_item[r.item]; });
    if (reviews.size() != before) changed = true;
  }
  if (reviews.empty()) {
    throw Error(ErrorCode::kEmptyDataset, "dataset is empty after filtering");
  }
  return compact(ds, keep_user, keep_item, keep_feature, reviews);
}

Dataset truncate_features(const Dataset& ds, int count) {
  std::vector<int> freq(ds.num_features(), 0);
  for (const Review& r : ds.reviews) {
    for (const auto& m : r.mentions) ++freq[m.feature];
  }
  std::vector<int> order(ds.num_features());
  for (int f = 0; f < ds.num_features(); ++f) order[f] = f;
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return freq[a] > freq[b]; });
  std::vector<bool> keep_feature(ds.num_features(), false);
  for (int i = 0; i < std::min<int>(count, ds.num_features()); ++i) {
    keep_feature[order[i]] = true;
  }
  return compact(ds, std::vector<bool>(ds.num_users(), true),
                 std::vector<bool>(ds.num_items(), true), keep_feature,
                 ds.reviews);
}

}  // namespace factree
