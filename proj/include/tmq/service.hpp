#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>

#include "tmq/experiments.hpp"

namespace tmq {

struct ServiceConfig {
  /// Session event logs live in `<data_dir>/sessions`; empty disables persistence.
  std::filesystem::path data_dir;
  /// Datasets a session may reference by name instead of uploading a core set.
  std::map<std::string, std::filesystem::path> datasets;
  AlConfig defaults;
  PoolMethod default_method = PoolMethod::UncertaintyHillClimb;
  std::string cors_origin = "*";
};

struct Response {
  int status = 200;
  std::string body;  // JSON
};

/// Labeling sessions behind the HTTP API. Routing is transport-independent so
/// handle() can be driven directly; HttpServer binds it to a socket.
///
///   POST /sessions                         create from a core-set CSV or a dataset path
///   GET  /sessions/{id}/queries?limit=m    pending queries, synthesizing a batch if none
///   POST /sessions/{id}/labels             [{query_id, label}]
///   GET  /sessions/{id}/metrics
///   GET  /sessions/{id}/provenance/{qid}
class SessionManager {
 public:
  SessionManager(const Resources& resources, ServiceConfig config);
  ~SessionManager();
  SessionManager(const SessionManager&) = delete;
  SessionManager& operator=(const SessionManager&) = delete;

  Response handle(std::string_view method, std::string_view path, std::string_view body,
                  const std::map<std::string, std::string>& query = {});

  /// Rebuilds sessions from the event logs under data_dir. Returns the count restored.
  std::size_t restore();

  std::size_t session_count() const;
  const ServiceConfig& config() const noexcept { return config_; }

 private:
  struct Session;

  Response create_session(std::string_view body);
  Response get_queries(Session& s, const std::map<std::string, std::string>& query);
  Response post_labels(Session& s, std::string_view body);
  Response get_metrics(Session& s);
  Response get_provenance(Session& s, const std::string& query_id);

  std::shared_ptr<Session> find(const std::string& id) const;
  std::shared_ptr<Session> build_session(const std::string& id, const std::string& request_body,
                                         const std::string& created_at);
  void issue_batch(Session& s);
  bool apply_label(Session& s, const std::string& query_id, int label);
  void log_event(Session& s, const std::string& line);
  std::filesystem::path log_path(const std::string& id) const;

  Resources resources_;
  ServiceConfig config_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t next_id_ = 1;
};

/// cpp-httplib front end for a SessionManager.
class HttpServer {
 public:
  explicit HttpServer(SessionManager& manager);
  ~HttpServer();

  /// Binds (port 0 picks a free port) and serves on a background thread; returns the port.
  int start(const std::string& host, int port);
  /// Binds and serves on the calling thread until stop().
  bool listen(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace tmq
