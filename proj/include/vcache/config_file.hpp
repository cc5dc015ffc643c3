#pragma once

#include <chrono>
#include <optional>
#include <string>

#include "vcache/backends.hpp"
#include "vcache/policy.hpp"
#include "vcache/types.hpp"

namespace vcache {

/// Which part of a chat conversation forms the cache key.
enum class CacheKeyMode { LastUserMessage, FullConversation };

struct ServiceConfig {
  std::string listen_host = "127.0.0.1";
  int listen_port = 8080;
  HttpBackendOptions upstream_chat;
  HttpBackendOptions upstream_embedding;
  /// Judge endpoint; defaults to the chat upstream when unset.
  std::optional<HttpBackendOptions> judge;
  std::string judge_template_path;
  CacheConfig cache_config;
  PolicyKind policy = policies::VCacheVerified{0.02};
  std::optional<std::string> snapshot_path;
  std::optional<std::chrono::seconds> snapshot_interval;
  bool admin_enabled = false;
  /// Environment variable holding the admin token; empty disables the check.
  std::string admin_token_env;
  CacheKeyMode key_mode = CacheKeyMode::LastUserMessage;
};

/// Parses the INI-style config text. Sections: [policy], [cache], [index],
/// [judging], [backends], [service]. Unknown sections or keys are errors.
/// Throws ConfigError.
ServiceConfig parse_config(const std::string& text);
ServiceConfig load_config(const std::string& path);

/// Cross-field checks (snapshot_interval requires snapshot_path, ...).
void validate_service_config(const ServiceConfig& config);

}  // namespace vcache
