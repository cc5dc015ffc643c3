#include "vcache/backends.hpp"

#include <cstdlib>
#include <optional>
#include <random>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace vcache {

using nlohmann::json;

namespace {

std::uint64_t fnv1a(std::string_view text, std::uint64_t seed) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ (seed * 0x9e3779b97f4a7c15ULL);
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// splitmix64; fully specified, unlike the std distributions.
std::uint64_t next_u64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double next_unit(std::uint64_t& state) {
  return static_cast<double>(next_u64(state) >> 11) * 0x1.0p-53;
}

void require_text(const Prompt& prompt, const char* who) {
  if (prompt.text.empty()) throw BackendError(std::string(who) + ": empty prompt");
}

std::int64_t require_id(const Prompt& prompt, const char* who) {
  if (!prompt.id) throw BackendError(std::string(who) + ": prompt has no trace id");
  return *prompt.id;
}

bool transient(int status) { return status == 429 || status >= 500; }

}  // namespace

MockEmbeddingBackend::MockEmbeddingBackend(std::size_t dim, std::uint64_t seed)
    : dim_(dim), seed_(seed) {
  if (dim == 0) throw ConfigError("mock embedding dimension must be positive");
}

EmbeddingVector MockEmbeddingBackend::embed(const Prompt& prompt) {
  require_text(prompt, "mock embedding");
  std::uint64_t state = fnv1a(prompt.text, seed_);
  Eigen::VectorXd v(static_cast<Eigen::Index>(dim_));
  // Box-Muller pairs give an isotropic direction after normalization.
  for (Eigen::Index i = 0; i < v.size(); i += 2) {
    const double u1 = 1.0 - next_unit(state);
    const double u2 = next_unit(state);
    const double r = std::sqrt(-2.0 * std::log(u1));
    v[i] = r * std::cos(2.0 * M_PI * u2);
    if (i + 1 < v.size()) v[i + 1] = r * std::sin(2.0 * M_PI * u2);
  }
  v.normalize();
  return EmbeddingVector(std::move(v));
}

void PrecomputedEmbeddingBackend::add(std::int64_t id, EmbeddingVector v) {
  table_.insert_or_assign(id, std::move(v));
}

EmbeddingVector PrecomputedEmbeddingBackend::embed(const Prompt& prompt) {
  const std::int64_t id = require_id(prompt, "precomputed embedding");
  auto it = table_.find(id);
  if (it == table_.end()) {
    throw BackendError("precomputed embedding: unknown prompt id " + std::to_string(id));
  }
  return it->second;
}

void OracleChatBackend::add(std::int64_t id, std::string gold_response) {
  gold_.insert_or_assign(id, std::move(gold_response));
}

std::string OracleChatBackend::generate(const Prompt& prompt) {
  require_text(prompt, "oracle");
  const std::int64_t id = require_id(prompt, "oracle");
  auto it = gold_.find(id);
  if (it == gold_.end()) throw BackendError("oracle: unknown prompt id " + std::to_string(id));
  return it->second;
}

ScriptedChatBackend::ScriptedChatBackend(std::vector<std::string> responses) {
  for (auto& r : responses) queue_.push_back({std::move(r), false});
}

void ScriptedChatBackend::push(std::string response) {
  std::lock_guard lock(mutex_);
  queue_.push_back({std::move(response), false});
}

void ScriptedChatBackend::push_failure(std::string message) {
  std::lock_guard lock(mutex_);
  queue_.push_back({std::move(message), true});
}

std::string ScriptedChatBackend::generate(const Prompt& prompt) {
  require_text(prompt, "scripted");
  std::lock_guard lock(mutex_);
  calls_.push_back(prompt.text);
  if (queue_.empty()) throw BackendError("scripted backend exhausted");
  Item item = std::move(queue_.front());
  queue_.pop_front();
  if (item.failure) throw BackendError(item.text);
  return item.text;
}

std::size_t ScriptedChatBackend::call_count() const {
  std::lock_guard lock(mutex_);
  return calls_.size();
}

std::vector<std::string> ScriptedChatBackend::calls() const {
  std::lock_guard lock(mutex_);
  return calls_;
}

HttpJsonClient::HttpJsonClient(HttpBackendOptions options) : options_(std::move(options)) {
  const std::string& url = options_.endpoint;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw ConfigError("endpoint must be an absolute http(s) URL: " + url);
  }
  const auto path_start = url.find('/', scheme_end + 3);
  scheme_host_port_ = url.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : url.substr(path_start);
  if (options_.retries < 0) throw ConfigError("retries must be nonnegative");
}

HttpReply HttpJsonClient::post(const std::string& body) const {
  httplib::Headers headers;
  if (!options_.auth_env_var.empty()) {
    if (const char* token = std::getenv(options_.auth_env_var.c_str())) {
      headers.emplace("Authorization", std::string("Bearer ") + token);
    }
  }
  std::string last_error;
  std::optional<HttpReply> last_reply;
  auto backoff = options_.initial_backoff;
  for (int attempt = 0; attempt <= options_.retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
    httplib::Client client(scheme_host_port_);
    client.set_connection_timeout(options_.timeout);
    client.set_read_timeout(options_.timeout);
    client.set_write_timeout(options_.timeout);
    auto res = client.Post(path_, headers, body, "application/json");
    if (!res) {
      last_error = "connection error: " + httplib::to_string(res.error());
      last_reply.reset();
      continue;
    }
    HttpReply reply{res->status, res->body, res->get_header_value("Content-Type")};
    if (!transient(res->status)) return reply;
    last_reply = std::move(reply);
  }
  // A transient status that outlived the retries is still an answer; callers decide.
  if (last_reply) return *last_reply;
  throw BackendError(options_.endpoint + ": retries exhausted (" + last_error + ")");
}

HttpEmbeddingBackend::HttpEmbeddingBackend(HttpBackendOptions options)
    : client_(std::move(options)) {}

EmbeddingVector HttpEmbeddingBackend::embed(const Prompt& prompt) {
  require_text(prompt, "embedding");
  json request = {{"model", client_.options().model}, {"input", prompt.text}};
  HttpReply reply = client_.post(request.dump());
  if (reply.status != 200) {
    throw BackendError("embedding upstream returned status " + std::to_string(reply.status));
  }
  try {
    json parsed = json::parse(reply.body);
    auto values = parsed.at("data").at(0).at("embedding").get<std::vector<double>>();
    if (values.empty()) throw BackendError("embedding upstream returned an empty vector");
    return EmbeddingVector(std::span<const double>(values));
  } catch (const json::exception& e) {
    throw BackendError(std::string("malformed embedding reply: ") + e.what());
  } catch (const BackendError&) {
    throw;
  } catch (const Error& e) {
    throw BackendError(std::string("malformed embedding reply: ") + e.what());
  }
}

std::string extract_completion_text(const std::string& body) {
  try {
    return json::parse(body).at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw BackendError(std::string("malformed chat completion: ") + e.what());
  }
}

HttpChatBackend::HttpChatBackend(HttpBackendOptions options) : client_(std::move(options)) {}

std::string HttpChatBackend::generate(const Prompt& prompt) {
  require_text(prompt, "chat");
  json request = {{"model", client_.options().model},
                  {"messages", json::array({{{"role", "user"}, {"content", prompt.text}}})}};
  HttpReply reply = client_.post(request.dump());
  if (reply.status != 200) {
    throw BackendError("chat upstream returned status " + std::to_string(reply.status));
  }
  return extract_completion_text(reply.body);
}

HttpReply HttpChatBackend::forward(const std::string& body) const { return client_.post(body); }

}  // namespace vcache
