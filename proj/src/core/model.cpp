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

#include "core/model.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include <spdlog/spdlog.h>

#include "core/error.hpp"

namespace factree {

using nlohmann::json;

namespace {

constexpr char kBase64Alphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::optional<int> find_sorted(const std::vector<std::string>& names,
                               const std::string& key) {
  auto it = std::lower_bound(names.begin(), names.end(), key);
  if (it == names.end() || *it != key) return std::nullopt;
  return static_cast<int>(it - names.begin());
}

class PhaseTimer {
 public:
  explicit PhaseTimer(ConvergenceReport& report) : report_(report) {}

  void mark(std::string phase) {
    const auto now = std::chrono::steady_clock::now();
    report_.phase_seconds.emplace_back(
        std::move(phase), std::chrono::duration<double>(now - start_).count());
    start_ = now;
  }

 private:
  ConvergenceReport& report_;
  std::chrono::steady_clock::time_point start_ =
      std::chrono::steady_clock::now();
};

}  // namespace

std::string base64_encode(const std::vector<double>& values) {
  std::string bytes(values.size() * 8, '\0');
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(values[i]);
    for (int b = 0; b < 8; ++b) {
      bytes[i * 8 + b] = static_cast<char>((bits >> (8 * b)) & 0xff);
    }
  }
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  for (std::size_t i = 0; i < bytes.size(); i += 3) {
    std::uint32_t chunk = static_cast<unsigned char>(bytes[i]) << 16;
    const std::size_t left = bytes.size() - i;
    if (left > 1) chunk |= static_cast<unsigned char>(bytes[i + 1]) << 8;
    if (left > 2) chunk |= static_cast<unsigned char>(bytes[i + 2]);
    out += kBase64Alphabet[(chunk >> 18) & 63];
    out += kBase64Alphabet[(chunk >> 12) & 63];
    out += left > 1 ? kBase64Alphabet[(chunk >> 6) & 63] : '=';
    out += left > 2 ? kBase64Alphabet[chunk & 63] : '=';
  }
  return out;
}

std::vector<double> base64_decode(const std::string& text) {
  auto value = [](char c) -> int {
    const char* p = std::strchr(kBase64Alphabet, c);
    return c != '\0' && p ? static_cast<int>(p - kBase64Alphabet) : -1;
  };
  if (text.size() % 4 != 0) throw Error(ErrorCode::kSchema, "bad base64 length");
  std::string bytes;
  for (std::size_t i = 0; i < text.size(); i += 4) {
    std::uint32_t chunk = 0;
    int pad = 0;
    for (int k = 0; k < 4; ++k) {
      const char c = text[i + k];
      if (c == '=' && k >= 2 && i + 4 == text.size()) {
        ++pad;
        chunk <<= 6;
        continue;
      }
      const int v = value(c);
      if (v < 0 || pad > 0) throw Error(ErrorCode::kSchema, "bad base64 data");
      chunk = (chunk << 6) | static_cast<std::uint32_t>(v);
    }
    bytes += static_cast<char>((chunk >> 16) & 0xff);
    if (pad < 2) bytes += static_cast<char>((chunk >> 8) & 0xff);
    if (pad < 1) bytes += static_cast<char>(chunk & 0xff);
  }
  if (bytes.size() % 8 != 0) {
    throw Error(ErrorCode::kSchema, "base64 payload is not a float64 array");
  }
  std::vector<double> out(bytes.size() / 8);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) {
      bits |= static_cast<std::uint64_t>(
                  static_cast<unsigned char>(bytes[i * 8 + b]))
              << (8 * b);
    }
    out[i] = std::bit_cast<double>(bits);
  }
  return out;
}

std::optional<int> FactModel::user_index(const std::string& id) const {
  return find_sorted(users, id);
}

std::optional<int> FactModel::item_index(const std::string& id) const {
  return find_sorted(items, id);
}

std::optional<int> FactModel::feature_index(const std::string& name) const {
  return find_sorted(vocab, name);
}

void FactModel::finalize() {
  user_leaf = user_tree.leaf_assignment(num_users());
  item_leaf = item_tree.leaf_assignment(num_items());
  user_factors = harvest_factors(user_tree, num_users(),
                                 personal_user ? &*personal_user : nullptr);
  item_factors = harvest_factors(item_tree, num_items(),
                                 personal_item ? &*personal_item : nullptr);
}

FactorMatrix init_item_factors(const TrainingData& data,
                               const Hyperparams& hp) {
  return train_flat_mf(data.interactions, data.pairs, hp).items;
}

FactorMatrix init_item_factors(const Dataset& ds, const Hyperparams& hp) {
  if (ds.reviews.empty()) {
    throw Error(ErrorCode::kEmptyDataset, "dataset has no observations");
  }
  return init_item_factors(TrainingData::build(ds, hp), hp);
}

FactModel alternate(const Dataset& ds, const TrainConfig& cfg) {
  cfg.validate();
  if (ds.reviews.empty()) {
    throw Error(ErrorCode::kEmptyDataset, "dataset has no observations");
  }
  const Hyperparams& hp = cfg.hp;
  FactModel model;
  model.config = cfg;
  model.vocab = ds.features;
  model.users = ds.users;
  model.items = ds.items;
  model.user_seen.resize(ds.num_users());
  for (const Review& r : ds.reviews) model.user_seen[r.user].push_back(r.item);
  for (auto& seen : model.user_seen) std::sort(seen.begin(), seen.end());

  PhaseTimer timer(model.report);
  const ProfileSet user_profiles =
      normalize_profiles(build_user_profiles(ds), cfg.normalization);
  const ProfileSet item_profiles =
      normalize_profiles(build_item_profiles(ds), cfg.normalization);
  model.spec = build_discretization(user_profiles, item_profiles,
                                    ds.num_features(), cfg.bins,
                                    cfg.normalization);
  const TrainingData data = TrainingData::build(ds, hp);
  timer.mark("profiles");

  const FlatFactors flat = train_flat_mf(data.interactions, data.pairs, hp);
  FactorMatrix items = flat.items;
  double previous = flat.objective;
  model.report.initial_objective = previous;
  timer.mark("init");
  spdlog::info("plain MF objective {:.6f}", previous);

  GrowOptions grow_options;
  grow_options.max_depth = cfg.depth;
  grow_options.min_node_size = cfg.min_node_size;
  grow_options.threads = cfg.threads;

  model.report.stop_reason = "max_alternations";
  for (int t = 1; t <= cfg.max_alternations; ++t) {
    const auto salt = static_cast<std::uint64_t>(t) * 16;

    FitContext user_ctx;
    user_ctx.side = Side::kUser;
    user_ctx.data = &data;
    user_ctx.counterpart = &items;
    user_ctx.hp = hp;
    user_ctx.use_parent_factors = cfg.use_parent_factors;
    model.user_tree = grow(user_ctx, user_profiles, model.spec.user_thresholds,
                           grow_options, derive_seed(hp.seed, salt + 1));
    model.personal_user.reset();
    if (cfg.use_personal_residuals) {
      model.personal_user = fit_personal_residuals(
          user_ctx, model.user_tree, derive_seed(hp.seed, salt + 2));
    }
    const FactorMatrix users =
        harvest_factors(model.user_tree, ds.num_users(),
                        model.personal_user ? &*model.personal_user : nullptr);
    timer.mark("user_tree_" + std::to_string(t));

    FitContext item_ctx;
    item_ctx.side = Side::kItem;
    item_ctx.data = &data;
    item_ctx.counterpart = &users;
    item_ctx.same_side = &items;
    item_ctx.hp = hp;
    item_ctx.use_parent_factors = cfg.use_parent_factors;
    model.item_tree = grow(item_ctx, item_profiles, model.spec.item_thresholds,
                           grow_options, derive_seed(hp.seed, salt + 3));
    model.personal_item.reset();
    const FactorMatrix item_leaves =
        harvest_factors(model.item_tree, ds.num_items(), nullptr);
    if (cfg.use_personal_residuals) {
      item_ctx.same_side = &item_leaves;
      model.personal_item = fit_personal_residuals(
          item_ctx, model.item_tree, derive_seed(hp.seed, salt + 4));
    }
    items = harvest_factors(model.item_tree, ds.num_items(),
                            model.personal_item ? &*model.personal_item
                                                : nullptr);
    timer.mark("item_tree_" + std::to_string(t));

    const double value =
        objective(users, items, data.interactions.observations, data.pairs, hp);
    if (!std::isfinite(value)) throw DivergenceError(t);
    model.report.objectives.push_back(value);
    spdlog::info("alternation {} objective {:.6f}", t, value);
    const double change =
        std::abs(previous - value) /
        std::max(std::abs(previous), std::numeric_limits<double>::min());
    previous = value;
    if (change < cfg.alt_tol) {
      model.report.stop_reason = "tolerance";
      break;
    }
  }
  model.finalize();
  return model;
}

double model_objective(const FactModel& model, const Dataset& ds) {
  const TrainingData data = TrainingData::build(ds, model.hp());
  return objective(model.user_factors, model.item_factors,
                   data.interactions.observations, data.pairs, model.hp());
}

namespace {

json nullable(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double real_or_nan(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN()
                     : j.get<double>();
}

json tree_to_json(const FactorTree& tree) {
  json nodes = json::array();
  for (const TreeNode& n : tree.nodes) {
    json node = {
        {"id", n.id},
        {"parent", n.parent},
        {"depth", n.depth},
        {"residual", base64_encode(n.residual)},
        {"accumulated", base64_encode(n.accumulated)},
        {"members", n.members},
        {"objective", nullable(n.objective)},
        {"split_objective", nullable(n.split_objective)},
        {"unsplit_objective", nullable(n.unsplit_objective)},
    };
    if (n.predicate) {
      node["feature"] = n.predicate->feature;
      node["threshold"] = n.predicate->threshold;
      node["children"] = *n.children;
    }
    nodes.push_back(std::move(node));
  }
  return {{"side", side_name(tree.side)},
          {"max_depth", tree.max_depth},
          {"nodes", std::move(nodes)}};
}

FactorTree tree_from_json(const json& j, Side side, int dim, int num_features,
                          int num_entities) {
  FactorTree tree;
  tree.side = side;
  tree.max_depth = j.at("max_depth").get<int>();
  const json& nodes = j.at("nodes");
  if (!nodes.is_array() || nodes.empty()) {
    throw Error(ErrorCode::kSchema, "tree has no nodes");
  }
  for (const json& jn : nodes) {
    TreeNode n;
    n.id = jn.at("id").get<int>();
    n.parent = jn.at("parent").get<int>();
    n.depth = jn.at("depth").get<int>();
    n.residual = base64_decode(jn.at("residual").get<std::string>());
    n.accumulated = base64_decode(jn.at("accumulated").get<std::string>());
    n.members = jn.at("members").get<std::vector<int>>();
    n.objective = real_or_nan(jn.at("objective"));
    n.split_objective = real_or_nan(jn.at("split_objective"));
    n.unsplit_objective = real_or_nan(jn.at("unsplit_objective"));
    if (jn.contains("feature")) {
      n.predicate = Predicate{jn.at("feature").get<int>(),
                              jn.at("threshold").get<double>()};
      n.children = jn.at("children").get<std::array<int, 3>>();
    }
    if (n.id != static_cast<int>(tree.nodes.size())) {
      throw Error(ErrorCode::kSchema, "tree node ids are not sequential");
    }
    if (static_cast<int>(n.residual.size()) != dim ||
        static_cast<int>(n.accumulated.size()) != dim) {
      throw Error(ErrorCode::kSchema, "tree node factor has wrong dimension");
    }
    if (n.predicate &&
        (n.predicate->feature < 0 || n.predicate->feature >= num_features)) {
      throw Error(ErrorCode::kSchema, "predicate feature outside vocabulary");
    }
    tree.nodes.push_back(std::move(n));
  }
  const int count = static_cast<int>(tree.nodes.size());
  for (const TreeNode& n : tree.nodes) {
    if (n.id == 0 ? n.parent != -1 : (n.parent < 0 || n.parent >= n.id)) {
      throw Error(ErrorCode::kSchema, "tree node has an invalid parent");
    }
    if (n.children) {
      for (int c : *n.children) {
        if (c <= n.id || c >= count || tree.nodes[c].parent != n.id) {
          throw Error(ErrorCode::kSchema, "tree node has an invalid child");
        }
      }
    }
    for (int e : n.members) {
      if (e < 0 || e >= num_entities) {
        throw Error(ErrorCode::kSchema, "tree member outside entity range");
      }
    }
  }
  for (int leaf : tree.leaf_assignment(num_entities)) {
    if (leaf < 0) throw Error(ErrorCode::kSchema, "entity without a leaf");
  }
  return tree;
}

std::uint32_t checksum_of(const json& j) {
  const std::string body = j.dump();
  return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(body.data()),
            static_cast<uInt>(body.size())));
}

std::string hex32(std::uint32_t v) {
  char buf[9];
  std::snprintf(buf, sizeof(buf), "%08x", v);
  return buf;
}

}  // namespace

json model_to_json(const FactModel& model) {
  json config = config_to_json(model.config);
  config.erase("hp");
  json j = {
      {"format", "factree-model"},
      {"version", kModelVersion},
      {"hp", hyperparams_to_json(model.hp())},
      {"config", std::move(config)},
      {"vocab", model.vocab},
      {"users", model.users},
      {"items", model.items},
      {"spec",
       {{"user_thresholds", model.spec.user_thresholds},
        {"item_thresholds", model.spec.item_thresholds},
        {"normalization", normalization_name(model.spec.mode)},
        {"bins", model.spec.bins}}},
      {"user_tree", tree_to_json(model.user_tree)},
      {"item_tree", tree_to_json(model.item_tree)},
      {"user_seen", model.user_seen},
      {"report",
       {{"initial_objective", nullable(model.report.initial_objective)},
        {"objectives", model.report.objectives},
        {"stop_reason", model.report.stop_reason}}},
  };
  if (model.personal_user || model.personal_item) {
    json personal = json::object();
    if (model.personal_user) {
      personal["user"] = base64_encode(model.personal_user->values());
    }
    if (model.personal_item) {
      personal["item"] = base64_encode(model.personal_item->values());
    }
    j["personal_residuals"] = std::move(personal);
  }
  j["checksum"] = hex32(checksum_of(j));
  return j;
}

FactModel model_from_json(json j) {
  if (!j.is_object()) throw Error(ErrorCode::kSchema, "model is not an object");
  if (j.value("format", "") != "factree-model") {
    throw Error(ErrorCode::kSchema, "not a factree model file");
  }
  const auto version_it = j.find("version");
  if (version_it == j.end() || !version_it->is_number_integer()) {
    throw Error(ErrorCode::kSchema, "model version missing");
  }
  const int version = version_it->get<int>();
  if (version < 1 || version > kModelVersion) {
    throw Error(ErrorCode::kVersion,
                "unsupported model version " + std::to_string(version) +
                    " (this build reads 1.." + std::to_string(kModelVersion) +
                    ")");
  }
  const auto checksum_it = j.find("checksum");
  if (checksum_it == j.end() || !checksum_it->is_string()) {
    throw Error(ErrorCode::kChecksum, "model checksum missing");
  }
  const std::string stored = checksum_it->get<std::string>();
  j.erase("checksum");
  if (hex32(checksum_of(j)) != stored) {
    throw Error(ErrorCode::kChecksum, "model checksum mismatch");
  }

  FactModel model;
  try {
    if (version >= 2) {
      json config = j.at("config");
      config["hp"] = j.at("hp");
      model.config = config_from_json(config);
    } else {
      model.config.hp = hyperparams_from_json(j.at("hp"));
    }
    model.vocab = j.at("vocab").get<std::vector<std::string>>();
    model.users = j.at("users").get<std::vector<std::string>>();
    model.items = j.at("items").get<std::vector<std::string>>();
    const json& spec = j.at("spec");
    model.spec.user_thresholds =
        spec.at("user_thresholds").get<std::vector<std::vector<double>>>();
    model.spec.item_thresholds =
        spec.at("item_thresholds").get<std::vector<std::vector<double>>>();
    model.spec.mode =
        parse_normalization(spec.at("normalization").get<std::string>());
    model.spec.bins = spec.at("bins").get<int>();
    const int d = model.dim();
    const int k = static_cast<int>(model.vocab.size());
    model.user_tree =
        tree_from_json(j.at("user_tree"), Side::kUser, d, k, model.num_users());
    model.item_tree =
        tree_from_json(j.at("item_tree"), Side::kItem, d, k, model.num_items());
    if (auto it = j.find("personal_residuals"); it != j.end()) {
      auto load = [&](const char* key, int rows) -> std::optional<FactorMatrix> {
        if (!it->contains(key)) return std::nullopt;
        FactorMatrix m(rows, d);
        m.values() = base64_decode(it->at(key).get<std::string>());
        if (m.values().size() != static_cast<std::size_t>(rows) * d) {
          throw Error(ErrorCode::kSchema, "personal residuals have wrong size");
        }
        return m;
      };
      model.personal_user = load("user", model.num_users());
      model.personal_item = load("item", model.num_items());
    }
    if (auto it = j.find("report"); it != j.end()) {
      model.report.initial_objective =
          real_or_nan(it->value("initial_objective", json(nullptr)));
      model.report.objectives =
          it->value("objectives", std::vector<double>{});
      model.report.stop_reason = it->value("stop_reason", "");
    }
    if (version >= 2) {
      model.user_seen = j.at("user_seen").get<std::vector<std::vector<int>>>();
    } else {
      model.config.depth = model.user_tree.max_depth;
      model.config.bins = model.spec.bins;
      model.config.normalization = model.spec.mode;
      model.config.use_personal_residuals =
          model.personal_user.has_value() || model.personal_item.has_value();
      model.user_seen.assign(model.num_users(), {});
      model.migration_note =
          "migrated from model version 1: training config rebuilt from hp, "
          "tree depth and spec; seen-item lists were not stored, so "
          "exclude_seen has no effect";
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kSchema, std::string("model schema: ") + e.what());
  } catch (const ValidationError& e) {
    throw Error(ErrorCode::kSchema, std::string("model schema: ") + e.what());
  }
  if (model.user_seen.size() != model.users.size()) {
    throw Error(ErrorCode::kSchema, "user_seen does not match users");
  }
  if (model.spec.user_thresholds.size() != model.vocab.size() ||
      model.spec.item_thresholds.size() != model.vocab.size()) {
    throw Error(ErrorCode::kSchema, "threshold lists do not match vocabulary");
  }
  model.finalize();
  return model;
}

std::string serialize_model(const FactModel& model) {
  return model_to_json(model).dump(1) + "\n";
}

FactModel deserialize_model(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    // A file cut short or garbled never parses; report it as corruption.
    throw Error(ErrorCode::kChecksum,
                std::string("model file is corrupt: ") + e.what());
  }
  return model_from_json(std::move(j));
}

void save_model(const FactModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << serialize_model(model);
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

FactModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return deserialize_model(buffer.str());
}

}  // namespace factree
