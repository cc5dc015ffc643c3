#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vcache/config_file.hpp"
#include "vcache/semantic_cache.hpp"

namespace vcache {

/// A fully formed HTTP reply produced by one of the service handlers.
struct ServiceResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
  std::vector<std::pair<std::string, std::string>> headers;

  std::optional<std::string> header(const std::string& name) const;
};

/// Extracts the cache key from a chat-completions request body.
/// Throws Error when the body is not valid JSON or has no usable prompt.
std::string extract_cache_key(const std::string& body, CacheKeyMode mode);

/// HTTP caching proxy in front of a chat-completions upstream.
///
///   POST /v1/chat/completions   cached completion (X-Cache: HIT|MISS)
///   GET  /stats                 counters, entries, uptime
///   POST /admin/flush           snapshot (if configured) then empty the cache
///   GET  /healthz               liveness
///
/// On startup an existing snapshot at snapshot_path is loaded; the config
/// file's cache settings take precedence over the ones stored in it.
class ProxyService {
 public:
  explicit ProxyService(ServiceConfig config);
  ~ProxyService();

  ProxyService(const ProxyService&) = delete;
  ProxyService& operator=(const ProxyService&) = delete;

  ServiceResponse handle_completion(const std::string& body);
  ServiceResponse handle_stats() const;
  /// `authorization` is the raw Authorization header (may be empty).
  ServiceResponse handle_flush(const std::string& authorization);
  ServiceResponse handle_healthz() const;

  /// Binds the configured address (port 0 picks a free one) and serves on a
  /// background thread. Returns the bound port.
  int start();
  /// Binds and serves on the calling thread until stop().
  void run();
  void stop();

  /// Writes a snapshot now; no-op without snapshot_path. Returns bytes written.
  std::size_t snapshot();

  SemanticCache& cache() { return *cache_; }
  const ServiceConfig& config() const { return config_; }

 private:
  struct Impl;

  int bind();
  void snapshot_loop();

  ServiceConfig config_;
  std::unique_ptr<Impl> impl_;
  std::unique_ptr<SemanticCache> cache_;
  std::chrono::steady_clock::time_point started_;
};

}  // namespace vcache
