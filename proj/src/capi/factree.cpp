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

#include "factree/factree.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <memory>
#include <mutex>
#include <string>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "core/config.hpp"
#include "core/dataset.hpp"
#include "core/error.hpp"
#include "core/eval.hpp"
#include "core/model.hpp"
#include "core/recommend.hpp"
#include "json.hpp"
#include "service/service.hpp"

using nlohmann::json;

struct fact_dataset {
  factree::Dataset data;
  std::vector<int> user_cluster;
  std::vector<int> item_cluster;
};

struct fact_config {
  factree::TrainConfig cfg;
};

struct fact_model {
  std::shared_ptr<const factree::FactModel> model;
};

struct fact_session {
  std::shared_ptr<const factree::FactModel> model;
  factree::InterviewSession session;
};

struct fact_server {
  std::shared_ptr<const factree::FactModel> model;
  std::unique_ptr<factree::Service> service;
  int port = -1;
};

namespace {

thread_local std::string last_error;

fact_status fail(factree::ErrorCode code, const std::string& message) {
  last_error = message;
  return static_cast<fact_status>(code);
}

template <typename Fn>
fact_status guard(Fn&& fn) {
  try {
    fn();
    last_error.clear();
    return FACT_OK;
  } catch (const factree::Error& e) {
    return fail(e.code(), e.what());
  } catch (const json::exception& e) {
    return fail(factree::ErrorCode::kValidation,
                std::string("invalid JSON argument: ") + e.what());
  } catch (const std::bad_alloc&) {
    return fail(factree::ErrorCode::kInternal, "out of memory");
  } catch (const std::exception& e) {
    return fail(factree::ErrorCode::kInternal, e.what());
  }
}

void require(const void* p, const char* what) {
  if (p == nullptr) {
    throw factree::ValidationError(std::string(what) + " must not be NULL");
  }
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void emit(char** out, const json& j) {
  require(out, "output pointer");
  *out = copy_string(j.dump());
}

json parse_options(const char* text) {
  if (text == nullptr || *text == '\0') return json::object();
  json j = json::parse(text);
  if (!j.is_object()) throw factree::ValidationError("options must be an object");
  return j;
}

void reject_unknown(const json& options, std::initializer_list<const char*> keys) {
  for (const auto& [key, _] : options.items()) {
    bool known = false;
    for (const char* k : keys) known = known || key == k;
    if (!known) throw factree::ValidationError("unknown option '" + key + "'");
  }
}

factree::EvalOptions eval_options(const json& o) {
  factree::EvalOptions options;
  if (o.contains("ks")) options.ks = o["ks"].get<std::vector<int>>();
  if (o.contains("gain")) {
    options.gain = factree::parse_gain(o["gain"].get<std::string>());
  }
  return options;
}

std::optional<int> max_folds(const json& o) {
  if (!o.contains("max_folds") || o["max_folds"].is_null()) return std::nullopt;
  return o["max_folds"].get<int>();
}

json ranked_json(const factree::FactModel& model, const factree::ResolvedUser& user,
                 const std::vector<factree::ScoredItem>& ranked,
                 const std::string& user_key) {
  json items = json::array();
  for (const auto& s : ranked) {
    const auto item_path = model.item_tree.path_to(model.item_leaf[s.item]);
    const auto e = factree::explain_paths(model, user.path, item_path, user_key,
                                          model.items[s.item]);
    items.push_back({{"item", model.items[s.item]},
                     {"score", s.score},
                     {"explanation", factree::explanation_to_json(e)}});
  }
  json path = json::array();
  for (int node : user.path) path.push_back(node);
  return {{"path", std::move(path)}, {"items", std::move(items)}};
}

json tree_summary(const factree::FactorTree& tree) {
  int leaves = 0;
  for (const auto& node : tree.nodes) leaves += node.is_leaf();
  return {{"levels", tree.levels()},
          {"nodes", tree.nodes.size()},
          {"leaves", leaves}};
}

}  // namespace

extern "C" {

const char* fact_version(void) { return "1.0.0"; }

const char* fact_last_error(void) { return last_error.c_str(); }

const char* fact_status_name(fact_status status) {
  if (status == FACT_OK) return "ok";
  if (status < FACT_ERR_PARSE || status > FACT_ERR_INTERNAL) return "unknown";
  return factree::error_code_name(static_cast<factree::ErrorCode>(status));
}

void fact_string_free(char* s) { std::free(s); }

fact_status fact_set_log_level(const char* level) {
  return guard([&] {
    require(level, "level");
    const std::string name = level;
    if (name != "error" && name != "warn" && name != "info" && name != "debug") {
      throw factree::ValidationError("log level must be error, warn, info or debug");
    }
    static std::once_flag once;
    std::call_once(once, [] {
      spdlog::set_default_logger(spdlog::stderr_color_mt("factree"));
    });
    spdlog::set_level(spdlog::level::from_str(name));
  });
}

fact_status fact_dataset_load(const char* path, const char* options_json,
                              fact_dataset** out) {
  return guard([&] {
    require(path, "path");
    require(out, "output pointer");
    const json o = parse_options(options_json);
    reject_unknown(o, {"scale", "vocabulary"});
    factree::ParseOptions options;
    if (o.contains("scale")) {
      const auto bounds = o["scale"].get<std::vector<double>>();
      if (bounds.size() != 2 || !(bounds[0] < bounds[1])) {
        throw factree::ValidationError("scale must be [min, max] with min < max");
      }
      options.scale = {bounds[0], bounds[1]};
    }
    if (o.contains("vocabulary")) {
      options.vocabulary =
          factree::load_vocabulary(o["vocabulary"].get<std::string>());
    }
    auto ds = std::make_unique<fact_dataset>();
    ds->data = factree::parse_dataset(std::filesystem::path(path), options);
    *out = ds.release();
  });
}

fact_status fact_dataset_filter(const fact_dataset* ds,
                                const char* thresholds_json,
                                fact_dataset** out) {
  return guard([&] {
    require(ds, "dataset");
    require(out, "output pointer");
    const json o = parse_options(thresholds_json);
    reject_unknown(o, {"min_feature_freq", "min_mentions_per_review",
                       "min_reviews_per_user", "min_reviews_per_item"});
    factree::FilterThresholds t;
    t.min_feature_freq = o.value("min_feature_freq", 0);
    t.min_mentions_per_review = o.value("min_mentions_per_review", 0);
    t.min_reviews_per_user = o.value("min_reviews_per_user", 0);
    t.min_reviews_per_item = o.value("min_reviews_per_item", 0);
    auto result = std::make_unique<fact_dataset>();
    result->data = factree::filter_dataset(ds->data, t);
    *out = result.release();
  });
}

fact_status fact_dataset_truncate_features(const fact_dataset* ds, int count,
                                           fact_dataset** out) {
  return guard([&] {
    require(ds, "dataset");
    require(out, "output pointer");
    auto result = std::make_unique<fact_dataset>();
    result->data = factree::truncate_features(ds->data, count);
    *out = result.release();
  });
}

fact_status fact_dataset_save(const fact_dataset* ds, const char* path) {
  return guard([&] {
    require(ds, "dataset");
    require(path, "path");
    std::ofstream file(path, std::ios::binary);
    if (!file) {
      throw factree::Error(factree::ErrorCode::kIo,
                           std::string("cannot write ") + path);
    }
    factree::write_dataset(file, ds->data);
    file.flush();
    if (!file) {
      throw factree::Error(factree::ErrorCode::kIo,
                           std::string("write failed for ") + path);
    }
  });
}

fact_status fact_dataset_summary(const fact_dataset* ds, char** json_out) {
  return guard([&] {
    require(ds, "dataset");
    const auto& d = ds->data;
    std::size_t mentions = 0;
    for (const auto& r : d.reviews) mentions += r.mentions.size();
    json j = {{"users", d.num_users()},
              {"items", d.num_items()},
              {"features", d.num_features()},
              {"reviews", d.reviews.size()},
              {"mentions", mentions},
              {"scale", {d.scale.min, d.scale.max}}};
    if (!ds->user_cluster.empty()) {
      j["user_cluster"] = ds->user_cluster;
      j["item_cluster"] = ds->item_cluster;
    }
    emit(json_out, j);
  });
}

fact_status fact_synth(const char* spec_json, fact_dataset** out) {
  return guard([&] {
    require(out, "output pointer");
    const auto spec = factree::synthetic_spec_from_json(parse_options(spec_json));
    auto generated = factree::synth_generate(spec);
    auto ds = std::make_unique<fact_dataset>();
    ds->data = std::move(generated.dataset);
    ds->user_cluster = std::move(generated.user_cluster);
    ds->item_cluster = std::move(generated.item_cluster);
    *out = ds.release();
  });
}

void fact_dataset_free(fact_dataset* ds) { delete ds; }

fact_status fact_config_new(fact_config** out) {
  return guard([&] {
    require(out, "output pointer");
    *out = new fact_config();
  });
}

fact_status fact_config_load(const char* path, fact_config** out) {
  return guard([&] {
    require(path, "path");
    require(out, "output pointer");
    auto cfg = std::make_unique<fact_config>();
    cfg->cfg = factree::load_config(path);
    *out = cfg.release();
  });
}

fact_status fact_config_set(fact_config* cfg, const char* assignment) {
  return guard([&] {
    require(cfg, "config");
    require(assignment, "assignment");
    factree::TrainConfig updated = cfg->cfg;
    factree::apply_override(updated, assignment);
    updated.validate();
    cfg->cfg = updated;
  });
}

fact_status fact_config_to_json(const fact_config* cfg, char** json_out) {
  return guard([&] {
    require(cfg, "config");
    emit(json_out, factree::config_to_json(cfg->cfg));
  });
}

void fact_config_free(fact_config* cfg) { delete cfg; }

fact_status fact_train(const fact_dataset* ds, const fact_config* cfg,
                       fact_model** out) {
  return guard([&] {
    require(ds, "dataset");
    require(cfg, "config");
    require(out, "output pointer");
    auto model = std::make_unique<fact_model>();
    model->model = std::make_shared<const factree::FactModel>(
        factree::alternate(ds->data, cfg->cfg));
    *out = model.release();
  });
}

fact_status fact_model_load(const char* path, fact_model** out) {
  return guard([&] {
    require(path, "path");
    require(out, "output pointer");
    auto model = std::make_unique<fact_model>();
    model->model =
        std::make_shared<const factree::FactModel>(factree::load_model(path));
    *out = model.release();
  });
}

fact_status fact_model_save(const fact_model* model, const char* path) {
  return guard([&] {
    require(model, "model");
    require(path, "path");
    factree::save_model(*model->model, path);
  });
}

fact_status fact_model_info(const fact_model* model, char** json_out) {
  return guard([&] {
    require(model, "model");
    const auto& m = *model->model;
    emit(json_out,
         {{"version", factree::kModelVersion},
          {"users", m.num_users()},
          {"items", m.num_items()},
          {"features", m.vocab.size()},
          {"dim", m.dim()},
          {"user_tree", tree_summary(m.user_tree)},
          {"item_tree", tree_summary(m.item_tree)},
          {"report",
           {{"initial_objective", m.report.initial_objective},
            {"objectives", m.report.objectives},
            {"stop_reason", m.report.stop_reason}}},
          {"config", factree::config_to_json(m.config)},
          {"migration_note", m.migration_note}});
  });
}

fact_status fact_model_timings(const fact_model* model, char** json_out) {
  return guard([&] {
    require(model, "model");
    json phases = json::array();
    double total = 0.0;
    for (const auto& [phase, seconds] : model->model->report.phase_seconds) {
      phases.push_back({{"phase", phase}, {"seconds", seconds}});
      total += seconds;
    }
    emit(json_out, {{"phases", std::move(phases)}, {"total_seconds", total}});
  });
}

void fact_model_free(fact_model* model) { delete model; }

fact_status fact_predict(const fact_model* model, const char* user,
                         const char* item, double* out) {
  return guard([&] {
    require(model, "model");
    require(user, "user");
    require(item, "item");
    require(out, "output pointer");
    const auto& m = *model->model;
    const auto resolved = factree::resolve_user(m, user);
    const auto j = m.item_index(item);
    if (!j) throw factree::NotFoundError(std::string("unknown item '") + item + "'");
    *out = factree::predict(resolved.factor, m.item_factors.row(*j));
  });
}

fact_status fact_recommend(const fact_model* model, const char* user, int k,
                           int exclude_seen, char** json_out) {
  return guard([&] {
    require(model, "model");
    require(user, "user");
    const auto& m = *model->model;
    const auto resolved = factree::resolve_user(m, user);
    json j = ranked_json(
        m, resolved, factree::recommend_topk(m, resolved, k, exclude_seen != 0),
        user);
    j["user"] = user;
    emit(json_out, j);
  });
}

fact_status fact_recommend_profile(const fact_model* model,
                                   const char* profile_json, int k,
                                   char** json_out) {
  return guard([&] {
    require(model, "model");
    const auto& m = *model->model;
    const json o = parse_options(profile_json);
    factree::FeatureProfile profile(factree::Side::kUser);
    double total = 0.0;
    for (const auto& [name, value] : o.items()) {
      const auto f = m.feature_index(name);
      if (!f) throw factree::ValidationError("unknown feature '" + name + "'");
      const double count = value.get<double>();
      if (!(count >= 0.0)) {
        throw factree::ValidationError("mention counts must be >= 0");
      }
      profile.set(*f, count);
      total += count;
    }
    profile.set_total_mentions(total);
    if (total == 0.0) profile = factree::FeatureProfile(factree::Side::kUser);
    const auto resolved = factree::resolve_profile(m, profile);
    emit(json_out,
         ranked_json(m, resolved, factree::recommend_topk(m, resolved, k, false),
                     "profile"));
  });
}

fact_status fact_explain(const fact_model* model, const char* user,
                         const char* item, const char* templates_path,
                         char** json_out) {
  return guard([&] {
    require(model, "model");
    require(user, "user");
    require(item, "item");
    const auto templates = templates_path != nullptr
                               ? factree::Templates::load(templates_path)
                               : factree::Templates::defaults();
    const auto& m = *model->model;
    const auto e = factree::explain(m, user, item, templates);
    json j = factree::explanation_to_json(e);
    j["user"] = user;
    j["item"] = item;
    json user_path = json::array();
    for (int n : factree::resolve_user(m, user).path) user_path.push_back(n);
    json item_path = json::array();
    for (int n : m.item_tree.path_to(m.item_leaf[*m.item_index(item)])) {
      item_path.push_back(n);
    }
    j["user_path"] = std::move(user_path);
    j["item_path"] = std::move(item_path);
    emit(json_out, j);
  });
}

fact_status fact_session_start(const fact_model* model, fact_session** out) {
  return guard([&] {
    require(model, "model");
    require(out, "output pointer");
    *out = new fact_session{model->model,
                            factree::InterviewSession(*model->model,
                                                      factree::random_session_id())};
  });
}

fact_status fact_session_state(const fact_session* session, char** json_out) {
  return guard([&] {
    require(session, "session");
    emit(json_out, factree::session_to_json(*session->model, session->session));
  });
}

fact_status fact_session_answer(fact_session* session, const char* answer) {
  return guard([&] {
    require(session, "session");
    require(answer, "answer");
    session->session.answer(factree::parse_answer(answer));
  });
}

fact_status fact_session_recommend(const fact_session* session, int k,
                                   char** json_out) {
  return guard([&] {
    require(session, "session");
    const auto& m = *session->model;
    json items = json::array();
    for (const auto& rec : factree::interview_recommend(m, session->session, k)) {
      items.push_back({{"item", m.items[rec.item.item]},
                       {"score", rec.item.score},
                       {"explanation", factree::explanation_to_json(rec.explanation)}});
    }
    emit(json_out, {{"session_id", session->session.id()},
                    {"leaf", session->session.current_node()},
                    {"items", std::move(items)}});
  });
}

void fact_session_free(fact_session* session) { delete session; }

fact_status fact_evaluate(const fact_model* model, const fact_dataset* test,
                          const char* options_json, char** json_out) {
  return guard([&] {
    require(model, "model");
    require(test, "test dataset");
    const json o = parse_options(options_json);
    reject_unknown(o, {"ks", "gain"});
    const auto options = eval_options(o);
    const auto result = factree::evaluate_model(*model->model, test->data, options);
    json metrics = json::object();
    for (std::size_t c = 0; c < options.ks.size(); ++c) {
      metrics["ndcg@" + std::to_string(options.ks[c])] = result.score.ndcg[c];
    }
    emit(json_out, {{"ks", options.ks},
                    {"gain", factree::gain_name(options.gain)},
                    {"metrics", std::move(metrics)},
                    {"users", result.score.users},
                    {"skipped_reviews", result.skipped_reviews}});
  });
}

fact_status fact_cross_validate(const fact_dataset* ds, const fact_config* cfg,
                                const char* options_json, char** json_out) {
  return guard([&] {
    require(ds, "dataset");
    require(cfg, "config");
    const json o = parse_options(options_json);
    reject_unknown(o, {"ks", "gain", "method", "folds", "max_folds"});
    const auto method = factree::parse_method(o.value("method", "fact"));
    const auto report = factree::cross_validate(
        ds->data, cfg->cfg, method, o.value("folds", 5), eval_options(o),
        max_folds(o));
    emit(json_out, factree::cv_report_json(report));
  });
}

fact_status fact_cold_start(const fact_dataset* ds, const fact_config* cfg,
                            const char* options_json, char** json_out) {
  return guard([&] {
    require(ds, "dataset");
    require(cfg, "config");
    const json o = parse_options(options_json);
    reject_unknown(o, {"k_values", "test_fraction", "cutoff", "gain", "seed"});
    factree::ColdStartOptions options;
    if (o.contains("k_values")) {
      options.k_values = o["k_values"].get<std::vector<int>>();
    }
    options.test_fraction = o.value("test_fraction", options.test_fraction);
    options.cutoff = o.value("cutoff", options.cutoff);
    if (o.contains("gain")) {
      options.gain = factree::parse_gain(o["gain"].get<std::string>());
    }
    options.seed = o.value("seed", options.seed);
    emit(json_out, factree::cold_start_json(
                       factree::cold_start_eval(ds->data, cfg->cfg, options)));
  });
}

fact_status fact_sweep(const fact_dataset* ds, const fact_config* cfg,
                       const char* options_json, char** json_out,
                       char** csv_out) {
  return guard([&] {
    require(ds, "dataset");
    require(cfg, "config");
    require(json_out, "output pointer");
    const json o = parse_options(options_json);
    reject_unknown(o, {"axis", "values", "folds", "max_folds", "ks", "gain"});
    if (!o.contains("axis") || !o.contains("values")) {
      throw factree::ValidationError("sweep needs \"axis\" and \"values\"");
    }
    const auto report = factree::sweep(
        ds->data, cfg->cfg, factree::parse_axis(o["axis"].get<std::string>()),
        o["values"].get<std::vector<double>>(), o.value("folds", 5),
        eval_options(o), max_folds(o));
    char* json_text = copy_string(factree::sweep_json(report).dump());
    if (csv_out != nullptr) {
      try {
        *csv_out = copy_string(factree::sweep_csv(report));
      } catch (...) {
        std::free(json_text);
        throw;
      }
    }
    *json_out = json_text;
  });
}

fact_status fact_server_start(const fact_model* model, const char* options_json,
                              fact_server** out) {
  return guard([&] {
    require(model, "model");
    require(out, "output pointer");
    const json o = parse_options(options_json);
    reject_unknown(o, {"host", "port", "ui_dir", "ttl_seconds", "capacity",
                       "templates", "threads", "cors_origin"});
    factree::ServiceOptions options;
    options.host = o.value("host", options.host);
    options.port = o.value("port", options.port);
    if (options.port < 0 || options.port > 65535) {
      throw factree::ValidationError("port must be in [0, 65535]");
    }
    if (o.contains("ui_dir") && !o["ui_dir"].is_null()) {
      options.ui_dir = o["ui_dir"].get<std::string>();
    }
    options.sessions.ttl =
        std::chrono::seconds(o.value("ttl_seconds", options.sessions.ttl.count()));
    options.sessions.capacity = o.value("capacity", options.sessions.capacity);
    if (options.sessions.capacity < 1) {
      throw factree::ValidationError("capacity must be >= 1");
    }
    if (o.contains("templates") && !o["templates"].is_null()) {
      options.templates =
          factree::Templates::load(o["templates"].get<std::string>());
    }
    options.threads = o.value("threads", options.threads);
    if (options.threads < 1) throw factree::ValidationError("threads must be >= 1");
    options.cors_origin = o.value("cors_origin", options.cors_origin);
    auto server = std::make_unique<fact_server>();
    server->model = model->model;
    server->service = std::make_unique<factree::Service>(server->model, options);
    server->port = server->service->start();
    *out = server.release();
  });
}

int fact_server_port(const fact_server* server) {
  return server == nullptr ? -1 : server->port;
}

fact_status fact_server_stop(fact_server* server) {
  return guard([&] {
    require(server, "server");
    server->service->stop();
  });
}

void fact_server_free(fact_server* server) { delete server; }

}  // extern "C"
