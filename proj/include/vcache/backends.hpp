#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "vcache/types.hpp"

namespace vcache {

class BackendError : public Error {
 public:
  using Error::Error;
};

/// A request as seen by the backends. `id` is set when the prompt comes
/// from a trace; precomputed and oracle backends key on it.
struct Prompt {
  std::string text;
  std::optional<std::int64_t> id;
};

class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  /// Throws BackendError on failure or empty text.
  virtual EmbeddingVector embed(const Prompt& prompt) = 0;
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  /// Throws BackendError on failure or empty prompt.
  virtual std::string generate(const Prompt& prompt) = 0;
};

/// Seeded hash of the text expanded to a unit vector. Deterministic across
/// calls and processes for the same (dim, seed).
class MockEmbeddingBackend final : public EmbeddingBackend {
 public:
  explicit MockEmbeddingBackend(std::size_t dim, std::uint64_t seed = 0);
  EmbeddingVector embed(const Prompt& prompt) override;

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

class PrecomputedEmbeddingBackend final : public EmbeddingBackend {
 public:
  void add(std::int64_t id, EmbeddingVector v);
  EmbeddingVector embed(const Prompt& prompt) override;

 private:
  std::unordered_map<std::int64_t, EmbeddingVector> table_;
};

/// Returns the gold response attached to a trace id.
class OracleChatBackend final : public ChatBackend {
 public:
  void add(std::int64_t id, std::string gold_response);
  std::string generate(const Prompt& prompt) override;

 private:
  std::unordered_map<std::int64_t, std::string> gold_;
};

/// Pops canned responses in order; records every prompt it receives.
class ScriptedChatBackend final : public ChatBackend {
 public:
  ScriptedChatBackend() = default;
  explicit ScriptedChatBackend(std::vector<std::string> responses);

  void push(std::string response);
  /// Queue a failure: the next generate() throws BackendError.
  void push_failure(std::string message);
  std::string generate(const Prompt& prompt) override;

  std::size_t call_count() const;
  std::vector<std::string> calls() const;

 private:
  struct Item {
    std::string text;
    bool failure = false;
  };
  mutable std::mutex mutex_;
  std::deque<Item> queue_;
  std::vector<std::string> calls_;
};

struct HttpBackendOptions {
  /// Full URL, e.g. http://127.0.0.1:8000/v1/embeddings
  std::string endpoint;
  std::string model;
  /// Environment variable holding a bearer token; empty means no auth header.
  std::string auth_env_var;
  std::chrono::milliseconds timeout{30000};
  int retries = 3;
  std::chrono::milliseconds initial_backoff{200};
};

struct HttpReply {
  int status = 0;
  std::string body;
  std::string content_type;
};

/// JSON POST client with retry on connection errors, 429 and 5xx, using
/// exponential backoff.
class HttpJsonClient {
 public:
  explicit HttpJsonClient(HttpBackendOptions options);

  /// Returns the first non-transient reply (any status), or the last reply
  /// once retries run out on transient statuses. Throws BackendError when
  /// no attempt got a reply at all.
  HttpReply post(const std::string& body) const;
  const HttpBackendOptions& options() const { return options_; }

 private:
  HttpBackendOptions options_;
  std::string scheme_host_port_;
  std::string path_;
};

/// OpenAI-style embeddings endpoint: {"model", "input"} -> data[0].embedding.
class HttpEmbeddingBackend final : public EmbeddingBackend {
 public:
  explicit HttpEmbeddingBackend(HttpBackendOptions options);
  EmbeddingVector embed(const Prompt& prompt) override;

 private:
  HttpJsonClient client_;
};

/// OpenAI-style chat completions: {"model", "messages"} -> choices[0].message.content.
class HttpChatBackend final : public ChatBackend {
 public:
  explicit HttpChatBackend(HttpBackendOptions options);
  std::string generate(const Prompt& prompt) override;

  /// Sends a caller-built request body unchanged.
  HttpReply forward(const std::string& body) const;
  const HttpBackendOptions& options() const { return client_.options(); }

 private:
  HttpJsonClient client_;
};

/// Extracts choices[0].message.content from a chat-completions body.
std::string extract_completion_text(const std::string& body);

}  // namespace vcache
