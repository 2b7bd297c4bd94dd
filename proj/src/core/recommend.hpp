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

#ifndef FACTREE_CORE_RECOMMEND_HPP_
#define FACTREE_CORE_RECOMMEND_HPP_

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "core/model.hpp"

namespace factree {

double predict(std::span<const double> user, std::span<const double> item);

struct ScoredItem {
  int item = 0;
  double score = 0.0;

  bool operator==(const ScoredItem&) const = default;
};

// Items by score descending, ties by id ascending. `exclude` must be sorted.
std::vector<ScoredItem> rank_items(const FactorMatrix& items,
                                   std::span<const double> user, int k,
                                   std::span<const int> exclude = {});

// A user factor together with the user-tree path that produced it.
struct ResolvedUser {
  std::optional<int> index;  // set for users known to the model
  std::vector<double> factor;
  std::vector<int> path;
};

// Known user: leaf + personal residual. Throws NotFoundError for unknown ids.
ResolvedUser resolve_user(const FactModel& model, const std::string& user_id);
// Raw (unnormalized) profile, e.g. from cold_start_profile(); routed with
// the model's normalization and served the leaf vector.
ResolvedUser resolve_profile(const FactModel& model,
                             const FeatureProfile& raw_profile);

std::vector<ScoredItem> recommend_topk(const FactModel& model,
                                       const ResolvedUser& user, int k,
                                       bool exclude_seen);

// Profile from the given reviews only (the first k of a new user).
FeatureProfile cold_start_profile(std::span<const Review> reviews);

struct ExplainedFeature {
  int feature = 0;
  std::string name;
  std::optional<Branch> user_branch;
  std::optional<Branch> item_branch;
  int level = 0;  // deepest 1-based tree level the feature appears at

  bool operator==(const ExplainedFeature&) const = default;
};

struct Explanation {
  std::vector<ExplainedFeature> shared;
  std::vector<ExplainedFeature> fallback;
  std::vector<std::string> rendered_features;
  std::string pattern;  // "match", "guess" or "generic"
  std::string rendered;
};

// Sentence templates. Clause templates take {feature}, {modifier} and
// {user_modifier} slots; modifier lists are keyed by side and branch.
struct Templates {
  std::map<std::string, std::string> text;
  std::map<std::string, std::vector<std::string>> modifiers;

  static Templates defaults();
  // JSON map of pattern id -> template (string) or modifier list (array),
  // merged over the defaults. Unknown ids are rejected.
  static Templates from_json(const nlohmann::json& j);
  static Templates load(const std::filesystem::path& path);
};

struct ExplainOptions {
  int min_features = 1;
  int max_rendered = 3;
};

Explanation explain_paths(const FactModel& model,
                          std::span<const int> user_path,
                          std::span<const int> item_path,
                          const std::string& user_key,
                          const std::string& item_key,
                          const Templates& templates = Templates::defaults(),
                          const ExplainOptions& options = {});

Explanation explain(const FactModel& model, const std::string& user_id,
                    const std::string& item_id,
                    const Templates& templates = Templates::defaults(),
                    const ExplainOptions& options = {});

// Every rendered feature is a predicate on one of the two paths and is named
// in the text; shared features lie on both paths.
bool explanation_sound(const FactModel& model, const Explanation& e,
                       std::span<const int> user_path,
                       std::span<const int> item_path);

nlohmann::json explanation_to_json(const Explanation& e);

enum class Answer { kLike, kDislike, kUnknown };

const char* answer_name(Answer a);
Answer parse_answer(const std::string& text);
Branch answer_branch(Answer a);

struct Question {
  int node = 0;
  int feature = 0;
  std::string name;
  std::string prompt;
};

class InterviewSession {
 public:
  explicit InterviewSession(const FactModel& model, std::string id = {});

  const std::string& id() const { return id_; }
  bool finished() const;
  int current_node() const { return path_.back(); }
  const std::vector<int>& path() const { return path_; }
  const std::vector<std::pair<int, Answer>>& answers() const {
    return answers_;
  }
  std::optional<Question> question() const;

  void answer(Answer a);

  // Leaf accumulated vector; requires a finished session.
  ResolvedUser user() const;
  // Profile that routes to the same leaf: like -> t, dislike -> below t,
  // unknown -> absent.
  FeatureProfile encoded_profile() const;

 private:
  const FactModel* model_;
  std::string id_;
  std::vector<int> path_;
  std::vector<std::pair<int, Answer>> answers_;  // (feature, answer)
};

struct Recommendation {
  ScoredItem item;
  Explanation explanation;
};

std::vector<Recommendation> interview_recommend(
    const FactModel& model, const InterviewSession& session, int k,
    const Templates& templates = Templates::defaults());

std::string question_prompt(const std::string& feature);

}  // namespace factree

#endif  // FACTREE_CORE_RECOMMEND_HPP_
