#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>

#include "forge/service/session.hpp"

namespace forge::service {

/// In-memory sessions, optionally mirrored to <dir>/<id>.json after every
/// mutation. Distinct sessions never share a lock.
class SessionStore {
 public:
  explicit SessionStore(std::shared_ptr<const Workspace> workspace, std::optional<std::filesystem::path> dir = {});

  /// Loads every session file already in the directory.
  std::size_t load_existing();
  std::string create();
  std::string add(DesignSession session);
  bool contains(const std::string& id) const;

  /// Runs `fn` under the session lock. Throws SessionError NotFound.
  void read(const std::string& id, const std::function<void(const DesignSession&)>& fn) const;
  /// Checks `expected_revision` under the lock, then runs `fn`; exactly one of
  /// two callers at the same revision gets through. Throws Conflict.
  void mutate(const std::string& id, std::uint64_t expected_revision, const std::function<void(DesignSession&)>& fn);

  const Workspace& workspace() const { return *workspace_; }
  std::shared_ptr<const Workspace> workspace_ptr() const { return workspace_; }

 private:
  struct Entry {
    explicit Entry(DesignSession s) : session(std::move(s)) {}
    mutable std::mutex mutex;
    DesignSession session;
  };
  Entry& entry(const std::string& id) const;

  std::shared_ptr<const Workspace> workspace_;
  std::optional<std::filesystem::path> dir_;
  mutable std::shared_mutex map_mutex_;
  std::map<std::string, std::unique_ptr<Entry>> sessions_;
  std::uint64_t next_id_ = 1;
};

struct ApiResponse {
  int status = 200;
  std::string body;
};

/// Routes one request. Bodies are JSON; errors come back as
/// {"error": message} with 400, 404, 409 or 422.
class Api {
 public:
  explicit Api(SessionStore& store) : store_(store) {}
  ApiResponse handle(const std::string& method, const std::string& path,
                     const std::map<std::string, std::string>& query, const std::string& body);

 private:
  SessionStore& store_;
};

/// HTTP front end on a background thread.
class ApiServer {
 public:
  explicit ApiServer(Api& api);
  ~ApiServer();
  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  /// Binds and starts serving; port 0 picks a free port. Returns the port.
  int start(const std::string& host, int port);
  /// Serves on the calling thread until stop().
  void run(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace forge::service
