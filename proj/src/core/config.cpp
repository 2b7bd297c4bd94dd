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

#include "core/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "core/error.hpp"
#include "toml.hpp"

namespace factree {

using nlohmann::json;

void TrainConfig::validate() const {
  if (depth < 1) throw ValidationError("depth must be >= 1");
  if (max_alternations < 1) {
    throw ValidationError("max_alternations must be >= 1");
  }
  if (!(alt_tol > 0.0)) throw ValidationError("alt_tol must be > 0");
  if (min_node_size < 1) throw ValidationError("min_node_size must be >= 1");
  if (bins < 1) throw ValidationError("bins must be >= 1");
  if (threads < 1) throw ValidationError("threads must be >= 1");
  hp.validate();
}

json hyperparams_to_json(const Hyperparams& hp) {
  return {
      {"dim", hp.dim},
      {"lambda_b", hp.lambda_b},
      {"lambda_u", hp.lambda_u},
      {"lambda_v", hp.lambda_v},
      {"lr", hp.lr},
      {"epochs", hp.epochs},
      {"n_bpr", hp.n_bpr},
      {"seed", hp.seed},
      {"tol", hp.tol},
      {"negatives_per_positive", hp.negatives_per_positive},
      {"init_scale", hp.init_scale},
      {"mf_rounds", hp.mf_rounds},
      {"personal_epochs", hp.personal_epochs},
  };
}

json config_to_json(const TrainConfig& cfg) {
  json j = {
      {"depth", cfg.depth},
      {"max_alternations", cfg.max_alternations},
      {"use_parent_factors", cfg.use_parent_factors},
      {"use_personal_residuals", cfg.use_personal_residuals},
      {"min_node_size", cfg.min_node_size},
      {"bins", cfg.bins},
      {"normalization", normalization_name(cfg.normalization)},
      {"threads", cfg.threads},
      {"hp", hyperparams_to_json(cfg.hp)},
  };
  // JSON has no infinity literal.
  if (std::isfinite(cfg.alt_tol)) {
    j["alt_tol"] = cfg.alt_tol;
  } else {
    j["alt_tol"] = "inf";
  }
  return j;
}

namespace {

template <typename T>
void read(const json& j, const char* key, T& out) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    throw ValidationError(std::string("config field '") + key +
                          "' has the wrong type");
  }
}

void reject_unknown(const json& j, std::initializer_list<const char*> known,
                    const std::string& scope) {
  for (const auto& [key, _] : j.items()) {
    bool found = false;
    for (const char* k : known) found = found || key == k;
    if (!found) {
      throw ValidationError("unknown config key '" + scope + key + "'");
    }
  }
}

double read_real(const json& j, const char* key, double fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (it->is_string()) {
    const std::string s = it->get<std::string>();
    if (s == "inf" || s == "infinity") {
      return std::numeric_limits<double>::infinity();
    }
    throw ValidationError(std::string("config field '") + key +
                          "' must be a number");
  }
  if (!it->is_number()) {
    throw ValidationError(std::string("config field '") + key +
                          "' must be a number");
  }
  return it->get<double>();
}

}  // namespace

Hyperparams hyperparams_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("hp must be an object");
  reject_unknown(j,
                 {"dim", "lambda_b", "lambda_u", "lambda_v", "lr", "epochs",
                  "n_bpr", "seed", "tol", "negatives_per_positive",
                  "init_scale", "mf_rounds", "personal_epochs"},
                 "hp.");
  Hyperparams hp;
  read(j, "dim", hp.dim);
  hp.lambda_b = read_real(j, "lambda_b", hp.lambda_b);
  hp.lambda_u = read_real(j, "lambda_u", hp.lambda_u);
  hp.lambda_v = read_real(j, "lambda_v", hp.lambda_v);
  hp.lr = read_real(j, "lr", hp.lr);
  read(j, "epochs", hp.epochs);
  read(j, "n_bpr", hp.n_bpr);
  read(j, "seed", hp.seed);
  hp.tol = read_real(j, "tol", hp.tol);
  read(j, "negatives_per_positive", hp.negatives_per_positive);
  hp.init_scale = read_real(j, "init_scale", hp.init_scale);
  read(j, "mf_rounds", hp.mf_rounds);
  read(j, "personal_epochs", hp.personal_epochs);
  return hp;
}

TrainConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("config must be an object");
  reject_unknown(j,
                 {"depth", "max_alternations", "alt_tol",
                  "use_parent_factors", "use_personal_residuals",
                  "min_node_size", "bins", "normalization", "threads", "hp"},
                 "");
  TrainConfig cfg;
  read(j, "depth", cfg.depth);
  read(j, "max_alternations", cfg.max_alternations);
  cfg.alt_tol = read_real(j, "alt_tol", cfg.alt_tol);
  read(j, "use_parent_factors", cfg.use_parent_factors);
  read(j, "use_personal_residuals", cfg.use_personal_residuals);
  read(j, "min_node_size", cfg.min_node_size);
  read(j, "bins", cfg.bins);
  read(j, "threads", cfg.threads);
  if (auto it = j.find("normalization"); it != j.end()) {
    if (!it->is_string()) {
      throw ValidationError("config field 'normalization' must be a string");
    }
    cfg.normalization = parse_normalization(it->get<std::string>());
  }
  if (auto it = j.find("hp"); it != j.end()) {
    cfg.hp = hyperparams_from_json(*it);
  }
  return cfg;
}

TrainConfig parse_config_text(const std::string& text, bool toml) {
  if (!toml) {
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ValidationError(std::string("config is not valid JSON: ") +
                            e.what());
    }
    return config_from_json(j);
  }
  toml::table table;
  try {
    table = toml::parse(text);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "config is not valid TOML: " << e.description() << " (line "
        << e.source().begin.line << ")";
    throw ValidationError(msg.str());
  }
  std::ostringstream as_json;
  as_json << toml::json_formatter{table};
  return config_from_json(json::parse(as_json.str()));
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string ext = path.extension().string();
  if (ext == ".toml") return parse_config_text(buffer.str(), true);
  if (ext == ".json") return parse_config_text(buffer.str(), false);
  try {
    return parse_config_text(buffer.str(), false);
  } catch (const ValidationError&) {
    return parse_config_text(buffer.str(), true);
  }
}

void apply_override(TrainConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ValidationError("override must look like key=value: " + assignment);
  }
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }
  json j = config_to_json(cfg);
  if (key.rfind("hp.", 0) == 0) {
    const std::string field = key.substr(3);
    if (!j["hp"].contains(field)) {
      throw ValidationError("unknown config key '" + key + "'");
    }
    j["hp"][field] = value;
  } else {
    if (!j.contains(key) || key == "hp") {
      throw ValidationError("unknown config key '" + key + "'");
    }
    j[key] = value;
  }
  cfg = config_from_json(j);
}

}  // namespace factree
