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

#ifndef FACTREE_SERVICE_SERVICE_HPP_
#define FACTREE_SERVICE_SERVICE_HPP_

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "core/model.hpp"
#include "core/recommend.hpp"
#include "json.hpp"

namespace httplib {
class Server;
}

namespace factree {

struct SessionStoreOptions {
  std::chrono::seconds ttl{30 * 60};
  std::size_t capacity = 10000;
};

// In-memory interview sessions keyed by 128-bit random ids. Each session is
// guarded by its own lock; a mutation that finds the lock taken fails with a
// StateError instead of waiting.
class SessionStore {
 public:
  using Clock = std::function<std::chrono::steady_clock::time_point()>;

  SessionStore(const FactModel& model, SessionStoreOptions options = {},
               Clock clock = [] { return std::chrono::steady_clock::now(); });

  std::string create();
  std::size_t size() const;

  // Runs `fn` under the session lock. Throws NotFoundError for unknown or
  // expired ids.
  nlohmann::json read(const std::string& id,
                      const std::function<nlohmann::json(
                          const InterviewSession&)>& fn) const;
  nlohmann::json mutate(
      const std::string& id,
      const std::function<nlohmann::json(InterviewSession&)>& fn);

 private:
  struct Entry {
    explicit Entry(InterviewSession s) : session(std::move(s)) {}
    InterviewSession session;
    mutable std::mutex lock;
    std::chrono::steady_clock::time_point last_used;
  };

  std::shared_ptr<Entry> find(const std::string& id) const;
  void evict_locked();

  const FactModel* model_;
  SessionStoreOptions options_;
  Clock clock_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
};

std::string random_session_id();

nlohmann::json session_to_json(const FactModel& model,
                               const InterviewSession& session);

struct ServiceOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::optional<std::filesystem::path> ui_dir;
  std::string cors_origin = "*";
  int default_k = 10;
  int max_k = 1000;
  int threads = 8;
  SessionStoreOptions sessions;
  Templates templates = Templates::defaults();
};

class Service {
 public:
  Service(std::shared_ptr<const FactModel> model, ServiceOptions options);
  ~Service();

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Binds the socket and returns the bound port.
  int bind();
  // Serves until stop(); bind() must have succeeded.
  void run();
  // bind() + run() on a background thread.
  int start();
  void stop();

  const SessionStore& sessions() const { return sessions_; }

 private:
  void install_routes();

  std::shared_ptr<const FactModel> model_;
  ServiceOptions options_;
  SessionStore sessions_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = -1;
};

}  // namespace factree

#endif  // FACTREE_SERVICE_SERVICE_HPP_
