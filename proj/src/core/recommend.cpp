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

#include "core/recommend.hpp"

#include <algorithm>
#include <fstream>

#include "core/error.hpp"

namespace factree {

using nlohmann::json;

double predict(std::span<const double> user, std::span<const double> item) {
  if (user.size() != item.size()) {
    throw ValidationError("factor dimensions do not agree");
  }
  return dot(user, item);
}

std::vector<ScoredItem> rank_items(const FactorMatrix& items,
                                   std::span<const double> user, int k,
                                   std::span<const int> exclude) {
  if (k < 1) throw ValidationError("k must be >= 1");
  std::vector<ScoredItem> scored;
  scored.reserve(items.rows());
  for (int i = 0; i < items.rows(); ++i) {
    if (std::binary_search(exclude.begin(), exclude.end(), i)) continue;
    scored.push_back({i, predict(user, items.row(i))});
  }
  const auto better = [](const ScoredItem& a, const ScoredItem& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.item < b.item;
  };
  const auto keep = std::min<std::size_t>(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + keep, scored.end(),
                    better);
  scored.resize(keep);
  return scored;
}

ResolvedUser resolve_user(const FactModel& model, const std::string& user_id) {
  const auto index = model.user_index(user_id);
  if (!index) {
    throw NotFoundError("unknown user '" + user_id +
                        "'; supply a profile or start an interview session");
  }
  ResolvedUser out;
  out.index = *index;
  const auto row = model.user_factors.row(*index);
  out.factor.assign(row.begin(), row.end());
  out.path = model.user_tree.path_to(model.user_leaf[*index]);
  return out;
}

ResolvedUser resolve_profile(const FactModel& model,
                             const FeatureProfile& raw_profile) {
  const FeatureProfile profile = normalize_profile(raw_profile, model.spec.mode);
  ResolvedUser out;
  out.path = route(model.user_tree, profile);
  out.factor = model.user_tree.node(out.path.back()).accumulated;
  return out;
}

std::vector<ScoredItem> recommend_topk(const FactModel& model,
                                       const ResolvedUser& user, int k,
                                       bool exclude_seen) {
  std::span<const int> exclude;
  if (exclude_seen && user.index) exclude = model.user_seen[*user.index];
  return rank_items(model.item_factors, user.factor, k, exclude);
}

FeatureProfile cold_start_profile(std::span<const Review> reviews) {
  std::vector<const Review*> ptrs;
  for (const Review& r : reviews) ptrs.push_back(&r);
  return profile_from_reviews(Side::kUser, ptrs);
}

Templates Templates::defaults() {
  Templates t;
  t.text = {
      {"match_prefix", "We recommend this item to you because "},
      {"guess_prefix", "We guess you would like this item because of "},
      {"match_clause",
       "its {modifier} {feature} matches your {user_modifier} {feature}"},
      {"user_clause", "your {user_modifier} {feature}"},
      {"item_clause", "its {modifier} {feature}"},
      {"joiner", ", and "},
      {"suffix", "."},
      {"generic", "This item is popular with users similar to you."},
  };
  t.modifiers = {
      {"item.L", {"good", "excellent"}},
      {"item.L.negative", {"acceptable", "passable"}},
      {"item.R", {"average", "ordinary"}},
      {"item.E", {"little-reviewed", "rarely discussed"}},
      {"user.L", {"emphasis on", "focus on"}},
      {"user.R", {"occasional interest in", "passing interest in"}},
      {"user.E", {"open mind about", "curiosity about"}},
  };
  return t;
}

Templates Templates::from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("templates must be a JSON object");
  Templates t = defaults();
  for (const auto& [key, value] : j.items()) {
    if (t.text.contains(key) && value.is_string()) {
      t.text[key] = value.get<std::string>();
    } else if (t.modifiers.contains(key) && value.is_array() &&
               !value.empty()) {
      t.modifiers[key] = value.get<std::vector<std::string>>();
    } else {
      throw ValidationError("unknown or malformed template '" + key + "'");
    }
  }
  return t;
}

Templates Templates::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  try {
    return from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("templates: ") + e.what());
  }
}

namespace {

struct PathFeature {
  int feature;
  Branch branch;
  double threshold;
  int level;
};

std::vector<PathFeature> path_features(const FactorTree& tree,
                                       std::span<const int> path) {
  std::vector<PathFeature> out;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    const TreeNode& node = tree.node(path[i]);
    const auto& children = *node.children;
    const auto at = std::find(children.begin(), children.end(), path[i + 1]);
    out.push_back({node.predicate->feature,
                   static_cast<Branch>(at - children.begin()),
                   node.predicate->threshold, node.depth + 1});
  }
  return out;
}

const PathFeature* find_feature(const std::vector<PathFeature>& fs, int f) {
  for (const auto& p : fs) {
    if (p.feature == f) return &p;
  }
  return nullptr;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string replace_all(std::string s, const std::string& from,
                        const std::string& to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos;
       pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
  return s;
}

}  // namespace

Explanation explain_paths(const FactModel& model,
                          std::span<const int> user_path,
                          std::span<const int> item_path,
                          const std::string& user_key,
                          const std::string& item_key,
                          const Templates& templates,
                          const ExplainOptions& options) {
  const auto user_fs = path_features(model.user_tree, user_path);
  const auto item_fs = path_features(model.item_tree, item_path);

  auto describe = [&](int f) {
    ExplainedFeature e;
    e.feature = f;
    e.name = model.vocab.at(f);
    if (const auto* u = find_feature(user_fs, f)) {
      e.user_branch = u->branch;
      e.level = std::max(e.level, u->level);
    }
    if (const auto* i = find_feature(item_fs, f)) {
      e.item_branch = i->branch;
      e.level = std::max(e.level, i->level);
    }
    return e;
  };
  const auto deeper_first = [](const ExplainedFeature& a,
                               const ExplainedFeature& b) {
    if (a.level != b.level) return a.level > b.level;
    return a.feature < b.feature;
  };

  Explanation out;
  std::vector<int> seen;
  for (const auto& u : user_fs) {
    if (find_feature(item_fs, u.feature)) {
      out.shared.push_back(describe(u.feature));
      seen.push_back(u.feature);
    }
  }
  std::sort(out.shared.begin(), out.shared.end(), deeper_first);
  if (static_cast<int>(out.shared.size()) < options.min_features) {
    for (const auto* fs : {&user_fs, &item_fs}) {
      for (const auto& p : *fs) {
        if (std::find(seen.begin(), seen.end(), p.feature) != seen.end()) {
          continue;
        }
        seen.push_back(p.feature);
        out.fallback.push_back(describe(p.feature));
      }
    }
    std::sort(out.fallback.begin(), out.fallback.end(), deeper_first);
  }

  std::vector<ExplainedFeature> chosen = out.shared;
  chosen.insert(chosen.end(), out.fallback.begin(), out.fallback.end());
  if (static_cast<int>(chosen.size()) > options.max_rendered) {
    chosen.resize(options.max_rendered);
  }
  if (chosen.empty()) {
    out.pattern = "generic";
    out.rendered = templates.text.at("generic");
    return out;
  }

  auto pick = [&](const std::string& key, const std::string& feature) {
    const auto& list = templates.modifiers.at(key);
    const auto h = fnv1a(user_key + '\x1f' + item_key + '\x1f' + feature);
    return list[h % list.size()];
  };
  auto item_modifier = [&](const ExplainedFeature& e) {
    const auto* p = find_feature(item_fs, e.feature);
    std::string key = std::string("item.") + branch_name(*e.item_branch);
    if (*e.item_branch == Branch::kLeft && p->threshold < 0.0) {
      key += ".negative";
    }
    return pick(key, e.name);
  };
  auto user_modifier = [&](const ExplainedFeature& e) {
    return pick(std::string("user.") + branch_name(*e.user_branch), e.name);
  };

  out.pattern = out.shared.empty() ? "guess" : "match";
  std::string text = templates.text.at(out.pattern + "_prefix");
  for (std::size_t c = 0; c < chosen.size(); ++c) {
    const ExplainedFeature& e = chosen[c];
    std::string clause;
    if (e.user_branch && e.item_branch) {
      clause = templates.text.at("match_clause");
    } else if (e.user_branch) {
      clause = templates.text.at("user_clause");
    } else {
      clause = templates.text.at("item_clause");
    }
    if (e.item_branch) clause = replace_all(clause, "{modifier}", item_modifier(e));
    if (e.user_branch) {
      clause = replace_all(clause, "{user_modifier}", user_modifier(e));
    }
    clause = replace_all(clause, "{feature}", e.name);
    if (c > 0) text += templates.text.at("joiner");
    text += clause;
    out.rendered_features.push_back(e.name);
  }
  text += templates.text.at("suffix");
  out.rendered = std::move(text);
  return out;
}

Explanation explain(const FactModel& model, const std::string& user_id,
                    const std::string& item_id, const Templates& templates,
                    const ExplainOptions& options) {
  const ResolvedUser user = resolve_user(model, user_id);
  const auto item = model.item_index(item_id);
  if (!item) throw NotFoundError("unknown item '" + item_id + "'");
  const auto item_path = model.item_tree.path_to(model.item_leaf[*item]);
  return explain_paths(model, user.path, item_path, user_id, item_id,
                       templates, options);
}

bool explanation_sound(const FactModel& model, const Explanation& e,
                       std::span<const int> user_path,
                       std::span<const int> item_path) {
  const auto user_fs = path_features(model.user_tree, user_path);
  const auto item_fs = path_features(model.item_tree, item_path);
  auto on_path = [&](const std::vector<PathFeature>& fs,
                     const std::string& name) {
    const auto f = model.feature_index(name);
    return f && find_feature(fs, *f) != nullptr;
  };
  for (const auto& s : e.shared) {
    if (!on_path(user_fs, s.name) || !on_path(item_fs, s.name)) return false;
  }
  for (const auto& name : e.rendered_features) {
    if (!on_path(user_fs, name) && !on_path(item_fs, name)) return false;
    if (e.rendered.find(name) == std::string::npos) return false;
  }
  return true;
}

namespace {

json feature_json(const ExplainedFeature& f) {
  auto branch = [](const std::optional<Branch>& b) {
    return b ? json(branch_name(*b)) : json(nullptr);
  };
  return {{"feature", f.name},
          {"user_branch", branch(f.user_branch)},
          {"item_branch", branch(f.item_branch)},
          {"level", f.level}};
}

}  // namespace

json explanation_to_json(const Explanation& e) {
  json shared = json::array();
  for (const auto& f : e.shared) shared.push_back(feature_json(f));
  json fallback = json::array();
  for (const auto& f : e.fallback) fallback.push_back(feature_json(f));
  return {{"shared_features", std::move(shared)},
          {"fallback_features", std::move(fallback)},
          {"features", e.rendered_features},
          {"pattern", e.pattern},
          {"text", e.rendered}};
}

const char* answer_name(Answer a) {
  switch (a) {
    case Answer::kLike:
      return "like";
    case Answer::kDislike:
      return "dislike";
    case Answer::kUnknown:
      return "unknown";
  }
  return "unknown";
}

Answer parse_answer(const std::string& text) {
  if (text == "like") return Answer::kLike;
  if (text == "dislike") return Answer::kDislike;
  if (text == "unknown") return Answer::kUnknown;
  throw ValidationError("answer must be like, dislike or unknown, got '" +
                        text + "'");
}

Branch answer_branch(Answer a) {
  switch (a) {
    case Answer::kLike:
      return Branch::kLeft;
    case Answer::kDislike:
      return Branch::kRight;
    case Answer::kUnknown:
      return Branch::kUnknown;
  }
  return Branch::kUnknown;
}

std::string question_prompt(const std::string& feature) {
  return "How do you like this " + feature + "?";
}

InterviewSession::InterviewSession(const FactModel& model, std::string id)
    : model_(&model), id_(std::move(id)), path_{0} {}

bool InterviewSession::finished() const {
  return model_->user_tree.node(current_node()).is_leaf();
}

std::optional<Question> InterviewSession::question() const {
  if (finished()) return std::nullopt;
  const TreeNode& node = model_->user_tree.node(current_node());
  Question q;
  q.node = node.id;
  q.feature = node.predicate->feature;
  q.name = model_->vocab.at(q.feature);
  q.prompt = question_prompt(q.name);
  return q;
}

void InterviewSession::answer(Answer a) {
  if (finished()) throw StateError("interview is already finished");
  const TreeNode& node = model_->user_tree.node(current_node());
  answers_.emplace_back(node.predicate->feature, a);
  path_.push_back((*node.children)[static_cast<int>(answer_branch(a))]);
}

ResolvedUser InterviewSession::user() const {
  if (!finished()) throw StateError("interview is not finished");
  ResolvedUser out;
  out.factor = model_->user_tree.node(current_node()).accumulated;
  out.path = path_;
  return out;
}

FeatureProfile InterviewSession::encoded_profile() const {
  FeatureProfile profile(Side::kUser);
  for (std::size_t i = 0; i < answers_.size(); ++i) {
    const Predicate& p = *model_->user_tree.node(path_[i]).predicate;
    switch (answers_[i].second) {
      case Answer::kLike:
        profile.set(p.feature, p.threshold);
        break;
      case Answer::kDislike:
        profile.set(p.feature, p.threshold - std::max(1.0, std::abs(p.threshold)));
        break;
      case Answer::kUnknown:
        break;
    }
  }
  return profile;
}

std::vector<Recommendation> interview_recommend(const FactModel& model,
                                                const InterviewSession& session,
                                                int k,
                                                const Templates& templates) {
  const ResolvedUser user = session.user();
  std::vector<Recommendation> out;
  for (const ScoredItem& s : rank_items(model.item_factors, user.factor, k)) {
    const auto item_path = model.item_tree.path_to(model.item_leaf[s.item]);
    out.push_back({s, explain_paths(model, user.path, item_path, session.id(),
                                    model.items[s.item], templates)});
  }
  return out;
}

}  // namespace factree
