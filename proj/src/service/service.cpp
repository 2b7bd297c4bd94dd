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

#include "service/service.hpp"

#include <algorithm>
#include <random>

#include <spdlog/spdlog.h>

#include "core/error.hpp"
#include "httplib.h"

namespace factree {

using nlohmann::json;

std::string random_session_id() {
  std::random_device device;
  static constexpr char kHex[] = "0123456789abcdef";
  std::string id;
  for (int word = 0; word < 4; ++word) {
    std::uint32_t bits = device();
    for (int nibble = 0; nibble < 8; ++nibble) {
      id += kHex[bits & 0xf];
      bits >>= 4;
    }
  }
  return id;
}

SessionStore::SessionStore(const FactModel& model, SessionStoreOptions options,
                           Clock clock)
    : model_(&model), options_(options), clock_(std::move(clock)) {}

void SessionStore::evict_locked() {
  const auto now = clock_();
  std::erase_if(sessions_, [&](const auto& kv) {
    return now - kv.second->last_used >= options_.ttl;
  });
  while (sessions_.size() >= options_.capacity && !sessions_.empty()) {
    auto oldest = std::min_element(
        sessions_.begin(), sessions_.end(), [](const auto& a, const auto& b) {
          return a.second->last_used < b.second->last_used;
        });
    sessions_.erase(oldest);
  }
}

std::string SessionStore::create() {
  std::lock_guard guard(mutex_);
  evict_locked();
  std::string id = random_session_id();
  while (sessions_.contains(id)) id = random_session_id();
  auto entry = std::make_shared<Entry>(InterviewSession(*model_, id));
  entry->last_used = clock_();
  sessions_.emplace(id, std::move(entry));
  return id;
}

std::size_t SessionStore::size() const {
  std::lock_guard guard(mutex_);
  const auto now = clock_();
  return std::count_if(sessions_.begin(), sessions_.end(), [&](const auto& kv) {
    return now - kv.second->last_used < options_.ttl;
  });
}

std::shared_ptr<SessionStore::Entry> SessionStore::find(
    const std::string& id) const {
  std::lock_guard guard(mutex_);
  auto it = sessions_.find(id);
  const auto now = clock_();
  if (it == sessions_.end() || now - it->second->last_used >= options_.ttl) {
    throw NotFoundError("no session '" + id + "' (unknown or expired)");
  }
  // Any access keeps the session alive.
  it->second->last_used = now;
  return it->second;
}

json SessionStore::read(
    const std::string& id,
    const std::function<json(const InterviewSession&)>& fn) const {
  const auto entry = find(id);
  std::lock_guard guard(entry->lock);
  return fn(entry->session);
}

json SessionStore::mutate(const std::string& id,
                          const std::function<json(InterviewSession&)>& fn) {
  const auto entry = find(id);
  std::unique_lock guard(entry->lock, std::try_to_lock);
  if (!guard.owns_lock()) {
    throw StateError("session is being updated by another request");
  }
  json out = fn(entry->session);
  std::lock_guard store_guard(mutex_);
  entry->last_used = clock_();
  return out;
}

json session_to_json(const FactModel& model, const InterviewSession& session) {
  json answers = json::array();
  for (const auto& [feature, answer] : session.answers()) {
    answers.push_back(
        {{"feature", model.vocab.at(feature)}, {"answer", answer_name(answer)}});
  }
  json question = nullptr;
  if (const auto q = session.question()) {
    question = {{"feature", q->name}, {"prompt", q->prompt}, {"node", q->node}};
  }
  return {{"session_id", session.id()},
          {"status", session.finished() ? "finished" : "active"},
          {"step", session.answers().size()},
          {"node", session.current_node()},
          {"max_questions", std::max(0, model.user_tree.levels() - 1)},
          {"question", std::move(question)},
          {"answers", std::move(answers)}};
}

namespace {

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kParse:
    case ErrorCode::kValidation:
      return 400;
    case ErrorCode::kNotFound:
      return 404;
    case ErrorCode::kState:
      return 409;
    default:
      return 500;
  }
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& code,
                const std::string& message) {
  send_json(res, status, {{"error", code}, {"message", message}});
}

// Wraps a handler so library errors map to JSON error bodies.
httplib::Server::Handler guarded(
    std::function<void(const httplib::Request&, httplib::Response&)> fn) {
  return [fn = std::move(fn)](const httplib::Request& req,
                              httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const Error& e) {
      send_error(res, status_for(e.code()), error_code_name(e.code()),
                 e.what());
    } catch (const json::exception& e) {
      send_error(res, 400, "validation_error",
                 std::string("bad request body: ") + e.what());
    } catch (const std::exception& e) {
      spdlog::error("request {} {} failed: {}", req.method, req.path, e.what());
      send_error(res, 500, "internal_error", e.what());
    }
  };
}

int parse_k(const httplib::Request& req, int fallback, int max_k) {
  if (!req.has_param("k")) return fallback;
  const std::string raw = req.get_param_value("k");
  std::size_t used = 0;
  int k = 0;
  try {
    k = std::stoi(raw, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != raw.size() || raw.empty()) {
    throw ValidationError("k must be an integer");
  }
  if (k < 1 || k > max_k) {
    throw ValidationError("k must be in [1, " + std::to_string(max_k) + "]");
  }
  return k;
}

json item_json(const FactModel& model, const ScoredItem& s,
               const Explanation& e) {
  return {{"item", model.items[s.item]},
          {"score", s.score},
          {"explanation", explanation_to_json(e)}};
}

}  // namespace

Service::Service(std::shared_ptr<const FactModel> model, ServiceOptions options)
    : model_(std::move(model)),
      options_(std::move(options)),
      sessions_(*model_, options_.sessions),
      server_(std::make_unique<httplib::Server>()) {
  const int threads = std::max(1, options_.threads);
  server_->new_task_queue = [threads] {
    return new httplib::ThreadPool(static_cast<std::size_t>(threads));
  };
  install_routes();
}

Service::~Service() { stop(); }

void Service::install_routes() {
  httplib::Server& s = *server_;
  const FactModel& model = *model_;

  s.set_default_headers({
      {"Access-Control-Allow-Origin", options_.cors_origin},
      {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
      {"Access-Control-Allow-Headers", "Content-Type"},
  });
  s.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.status = 204;
  });
  if (options_.ui_dir) {
    if (!s.set_mount_point("/ui", options_.ui_dir->string())) {
      throw ValidationError("ui directory does not exist: " +
                            options_.ui_dir->string());
    }
  }

  s.Get("/api/health", guarded([this, &model](const httplib::Request&,
                                              httplib::Response& res) {
          send_json(res, 200,
                    {{"status", "ok"},
                     {"model",
                      {{"users", model.num_users()},
                       {"items", model.num_items()},
                       {"features", model.vocab.size()},
                       {"dim", model.dim()},
                       {"user_tree_depth", model.user_tree.levels()},
                       {"item_tree_depth", model.item_tree.levels()},
                       {"max_questions",
                        std::max(0, model.user_tree.levels() - 1)}}},
                     {"sessions", sessions_.size()}});
        }));

  s.Post("/api/sessions",
         guarded([this, &model](const httplib::Request&,
                                httplib::Response& res) {
           const std::string id = sessions_.create();
           send_json(res, 201,
                     sessions_.read(id, [&](const InterviewSession& session) {
                       return session_to_json(model, session);
                     }));
         }));

  s.Get(R"(/api/sessions/([0-9a-f]+))",
        guarded([this, &model](const httplib::Request& req,
                               httplib::Response& res) {
          send_json(res, 200,
                    sessions_.read(req.matches[1],
                                   [&](const InterviewSession& session) {
                                     return session_to_json(model, session);
                                   }));
        }));

  s.Post(R"(/api/sessions/([0-9a-f]+)/answer)",
         guarded([this, &model](const httplib::Request& req,
                                httplib::Response& res) {
           const json body = json::parse(req.body);
           if (!body.is_object() || !body.contains("answer") ||
               !body["answer"].is_string()) {
             throw ValidationError("body must be {\"answer\": ...}");
           }
           const Answer answer = parse_answer(body["answer"].get<std::string>());
           std::optional<std::size_t> step;
           if (body.contains("step")) step = body["step"].get<std::size_t>();
           send_json(res, 200,
                     sessions_.mutate(req.matches[1], [&](InterviewSession& session) {
                       if (step && *step != session.answers().size()) {
                         throw StateError("answer is for step " +
                                          std::to_string(*step) +
                                          " but the session is at step " +
                                          std::to_string(session.answers().size()));
                       }
                       session.answer(answer);
                       return session_to_json(model, session);
                     }));
         }));

  s.Get(R"(/api/sessions/([0-9a-f]+)/recommendations)",
        guarded([this, &model](const httplib::Request& req,
                               httplib::Response& res) {
          const int k = parse_k(req, options_.default_k, options_.max_k);
          send_json(
              res, 200,
              sessions_.read(req.matches[1], [&](const InterviewSession& session) {
                json items = json::array();
                for (const auto& rec : interview_recommend(
                         model, session, k, options_.templates)) {
                  items.push_back(item_json(model, rec.item, rec.explanation));
                }
                return json{{"session_id", session.id()},
                            {"leaf", session.current_node()},
                            {"items", std::move(items)}};
              }));
        }));

  s.Get(R"(/api/users/([^/]+)/recommendations)",
        guarded([this, &model](const httplib::Request& req,
                               httplib::Response& res) {
          const int k = parse_k(req, options_.default_k, options_.max_k);
          const std::string user_id = req.matches[1];
          const ResolvedUser user = resolve_user(model, user_id);
          const bool exclude = req.get_param_value("exclude_seen") != "false";
          json items = json::array();
          for (const auto& s : recommend_topk(model, user, k, exclude)) {
            const auto item_path =
                model.item_tree.path_to(model.item_leaf[s.item]);
            items.push_back(item_json(
                model, s,
                explain_paths(model, user.path, item_path, user_id,
                              model.items[s.item], options_.templates)));
          }
          send_json(res, 200, {{"user", user_id}, {"items", std::move(items)}});
        }));

  s.Get("/api/explanations",
        guarded([this, &model](const httplib::Request& req,
                               httplib::Response& res) {
          if (!req.has_param("user") || !req.has_param("item")) {
            throw ValidationError("user and item query parameters are required");
          }
          const std::string user = req.get_param_value("user");
          const std::string item = req.get_param_value("item");
          json body = explanation_to_json(
              explain(model, user, item, options_.templates));
          body["user"] = user;
          body["item"] = item;
          send_json(res, 200, body);
        }));

  s.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) {
      send_error(res, res.status, res.status == 404 ? "not_found" : "http_error",
                 "no route for this request");
    }
  });
}

int Service::bind() {
  if (port_ >= 0) return port_;
  if (options_.port == 0) {
    port_ = server_->bind_to_any_port(options_.host);
  } else if (server_->bind_to_port(options_.host, options_.port)) {
    port_ = options_.port;
  }
  if (port_ < 0) {
    throw Error(ErrorCode::kIo, "cannot bind " + options_.host + ":" +
                                    std::to_string(options_.port));
  }
  return port_;
}

void Service::run() {
  if (port_ < 0) throw StateError("service is not bound");
  spdlog::info("serving on http://{}:{}", options_.host, port_);
  server_->listen_after_bind();
}

int Service::start() {
  const int port = bind();
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port;
}

void Service::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace factree
