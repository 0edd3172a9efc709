#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <string>

#include <json.hpp>

namespace mapscope {

/// Data directory layout:
///   registry.json
///   datasets/<dataset>/embeddings.jsonl
///   runs/<run id>/manifest.json and artifacts (graph.json or mapper/graph.json, ...)
struct ServiceOptions {
  std::filesystem::path data_dir;
  std::string host = "127.0.0.1";
  int port = 8080;  // 0: any free port
  std::size_t workers = 1;
  std::string cors_origin = "*";
};

/// Result of validating a POST /api/runs body.
struct RunRequest {
  std::string dataset;
  nlohmann::ordered_json config;  // canonical; its hash is the run id
  std::string run_id;
};

/// Throws Errc::InvalidArgument; the message is "<field>: <problem>".
RunRequest parse_run_request(const nlohmann::json& body, const std::filesystem::path& data_dir);

/// JSON-over-HTTP front end for runs in a data directory. Reads are served
/// from files on disk; recomputes run on a worker pool and publish their
/// artifacts with a directory rename, so a read never sees a partial run.
class Service {
 public:
  explicit Service(ServiceOptions options);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds and serves on a background thread; returns the bound port.
  int start();
  /// Binds and serves on the calling thread until stop().
  void run();
  void stop();
  /// Blocks until no recompute is queued or running.
  void wait_idle();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace mapscope
