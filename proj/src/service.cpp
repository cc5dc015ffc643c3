#include "vcache/service.hpp"

#include <atomic>
#include <condition_variable>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <shared_mutex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "vcache/snapshot.hpp"

namespace vcache {

using nlohmann::json;

namespace {

// Upstream answered, but not with a success; the reply is relayed as is.
class UpstreamStatusError : public BackendError {
 public:
  explicit UpstreamStatusError(HttpReply r)
      : BackendError("chat upstream returned status " + std::to_string(r.status)),
        reply(std::move(r)) {}
  HttpReply reply;
};

// Forwards the client's original body upstream and keeps the raw reply so a
// MISS can be returned byte for byte. One instance per request.
class ForwardingChat final : public ChatBackend {
 public:
  ForwardingChat(const HttpChatBackend& upstream, const std::string& body)
      : upstream_(upstream), body_(body) {}

  std::string generate(const Prompt&) override {
    HttpReply r = upstream_.forward(body_);
    if (r.status < 200 || r.status >= 300) throw UpstreamStatusError(std::move(r));
    std::string text = extract_completion_text(r.body);
    reply = std::move(r);
    return text;
  }

  std::optional<HttpReply> reply;

 private:
  const HttpChatBackend& upstream_;
  const std::string& body_;
};

class FlaggingEmbedding final : public EmbeddingBackend {
 public:
  explicit FlaggingEmbedding(EmbeddingBackend& inner) : inner_(inner) {}

  EmbeddingVector embed(const Prompt& prompt) override {
    try {
      return inner_.embed(prompt);
    } catch (...) {
      failed = true;
      throw;
    }
  }

  bool failed = false;

 private:
  EmbeddingBackend& inner_;
};

std::string message_text(const json& content) {
  if (content.is_string()) return content.get<std::string>();
  if (content.is_array()) {
    std::string out;
    for (const auto& part : content) {
      if (part.is_object() && part.value("type", "") == "text" && part.contains("text")) {
        if (!out.empty()) out += "\n";
        out += part.at("text").get<std::string>();
      }
    }
    return out;
  }
  return {};
}

ServiceResponse json_response(int status, const json& body) {
  ServiceResponse r;
  r.status = status;
  r.body = body.dump();
  return r;
}

ServiceResponse error_response(int status, const std::string& message) {
  return json_response(status, {{"error", {{"message", message}, {"code", status}}}});
}

std::string format_similarity(double s) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", s);
  return buf;
}

ServiceResponse relay(const HttpReply& reply) {
  ServiceResponse r;
  r.status = reply.status;
  r.body = reply.body;
  r.content_type = reply.content_type.empty() ? "application/json" : reply.content_type;
  r.headers.emplace_back("X-Cache", "MISS");
  return r;
}

}  // namespace

std::optional<std::string> ServiceResponse::header(const std::string& name) const {
  for (const auto& [k, v] : headers) {
    if (k == name) return v;
  }
  return std::nullopt;
}

std::string extract_cache_key(const std::string& body, CacheKeyMode mode) {
  json request;
  try {
    request = json::parse(body);
  } catch (const json::exception& e) {
    throw Error(std::string("request body is not valid JSON: ") + e.what());
  }
  if (!request.is_object() || !request.contains("messages") || !request["messages"].is_array()) {
    throw Error("request body must contain a messages array");
  }
  const json& messages = request["messages"];
  std::string key;
  try {
    if (mode == CacheKeyMode::LastUserMessage) {
      for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
        if (it->is_object() && it->value("role", "") == "user") {
          key = message_text(it->value("content", json()));
          break;
        }
      }
    } else {
      for (const auto& m : messages) {
        if (!m.is_object()) continue;
        key += m.value("role", "") + ": " + message_text(m.value("content", json())) + "\n";
      }
      if (key.find_first_not_of(" \n:") == std::string::npos) key.clear();
    }
  } catch (const json::exception& e) {
    throw Error(std::string("malformed message: ") + e.what());
  }
  if (key.empty()) throw Error("request has no nonempty user message");
  return key;
}

struct ProxyService::Impl {
  HttpChatBackend chat;
  HttpEmbeddingBackend embedding;
  std::unique_ptr<HttpChatBackend> judge;

  // Requests hold this shared; flush takes it exclusively so no request
  // straddles the snapshot-then-clear pair.
  std::shared_mutex flush_mutex;

  httplib::Server server;
  std::thread server_thread;
  int port = -1;

  std::thread snapshot_thread;
  std::mutex snapshot_mutex;  // serializes snapshot writes
  std::mutex stop_mutex;
  std::condition_variable stop_cv;
  bool stopping = false;

  Impl(const ServiceConfig& c) : chat(c.upstream_chat), embedding(c.upstream_embedding) {}
};

ProxyService::ProxyService(ServiceConfig config)
    : config_(std::move(config)), started_(std::chrono::steady_clock::now()) {
  validate_config(config_.cache_config);
  validate_service_config(config_);
  impl_ = std::make_unique<Impl>(config_);
  if (config_.cache_config.label_mode == LabelMode::Judge) {
    impl_->judge = std::make_unique<HttpChatBackend>(config_.judge.value_or(config_.upstream_chat));
  }

  if (config_.snapshot_path && std::filesystem::exists(*config_.snapshot_path)) {
    CacheState state = read_snapshot(*config_.snapshot_path);
    state.config = config_.cache_config;
    cache_ = std::make_unique<SemanticCache>(std::move(state), config_.policy);
  } else {
    cache_ = std::make_unique<SemanticCache>(config_.cache_config, config_.policy);
  }
  if (!config_.judge_template_path.empty()) {
    cache_->set_judge_template(JudgeTemplate::from_file(config_.judge_template_path));
  }

  auto& server = impl_->server;
  server.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
    ServiceResponse r = handle_completion(req.body);
    for (const auto& [k, v] : r.headers) res.set_header(k, v);
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  });
  server.Get("/stats", [this](const httplib::Request&, httplib::Response& res) {
    ServiceResponse r = handle_stats();
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  });
  server.Post("/admin/flush", [this](const httplib::Request& req, httplib::Response& res) {
    ServiceResponse r = handle_flush(req.get_header_value("Authorization"));
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  });
  server.Get("/healthz", [this](const httplib::Request&, httplib::Response& res) {
    ServiceResponse r = handle_healthz();
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  });

  if (config_.snapshot_interval) {
    impl_->snapshot_thread = std::thread([this] { snapshot_loop(); });
  }
}

ProxyService::~ProxyService() {
  stop();
  {
    std::lock_guard lock(impl_->stop_mutex);
    impl_->stopping = true;
  }
  impl_->stop_cv.notify_all();
  if (impl_->snapshot_thread.joinable()) impl_->snapshot_thread.join();
  cache_->drain();
  if (config_.snapshot_path) {
    try {
      snapshot();
    } catch (const std::exception& e) {
      std::cerr << "vcache-proxy: final snapshot failed: " << e.what() << "\n";
    }
  }
}

ServiceResponse ProxyService::handle_completion(const std::string& body) {
  std::string key;
  try {
    key = extract_cache_key(body, config_.key_mode);
    if (json::parse(body).value("stream", false)) {
      return error_response(400, "streaming responses are not supported");
    }
  } catch (const Error& e) {
    return error_response(400, e.what());
  } catch (const json::exception& e) {
    return error_response(400, e.what());
  }

  std::shared_lock flush_guard(impl_->flush_mutex);
  ForwardingChat chat(impl_->chat, body);
  FlaggingEmbedding embedding(impl_->embedding);
  RequestOutcome outcome;
  try {
    outcome = cache_->request(Prompt{key, std::nullopt}, {embedding, chat, impl_->judge.get()});
  } catch (const UpstreamStatusError& e) {
    // Client errors are the caller's to see; server errors become 502.
    if (e.reply.status < 500) return relay(e.reply);
    return error_response(502, e.what());
  } catch (const BackendError& e) {
    if (!embedding.failed) return error_response(502, e.what());
    // Embedding upstream down: act as a plain proxy, leave the cache alone.
    try {
      HttpReply r = impl_->chat.forward(body);
      if (r.status >= 500) return error_response(502, "chat upstream returned status " + std::to_string(r.status));
      return relay(r);
    } catch (const BackendError& e2) {
      return error_response(502, e2.what());
    }
  } catch (const Error& e) {
    return error_response(500, e.what());
  }

  if (outcome.action == Decision::Explore) {
    ServiceResponse r = relay(*chat.reply);
    if (outcome.similarity) r.headers.emplace_back("X-Cache-Similarity", format_similarity(*outcome.similarity));
    return r;
  }

  std::string model = "vcache";
  try {
    model = json::parse(body).value("model", model);
  } catch (const json::exception&) {
  }
  json reply = {
      {"id", "vcache-" + std::to_string(outcome.request_seq)},
      {"object", "chat.completion"},
      {"created", static_cast<std::int64_t>(std::time(nullptr))},
      {"model", model},
      {"choices",
       json::array({{{"index", 0},
                     {"message", {{"role", "assistant"}, {"content", outcome.response}}},
                     {"finish_reason", "stop"}}})},
      {"usage", {{"prompt_tokens", 0}, {"completion_tokens", 0}, {"total_tokens", 0}}},
  };
  ServiceResponse r = json_response(200, reply);
  r.headers.emplace_back("X-Cache", "HIT");
  r.headers.emplace_back("X-Cache-Similarity", format_similarity(*outcome.similarity));
  r.headers.emplace_back("X-Cache-Entry-Id", std::to_string(*outcome.entry_id_served));
  return r;
}

ServiceResponse ProxyService::handle_stats() const {
  const CacheStats s = cache_->stats();
  const double uptime =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count();
  json body = {
      {"n", s.n},
      {"exploits", s.exploits},
      {"explores", s.explores},
      {"tp", s.tp},
      {"fp", s.fp},
      {"labeled", s.labeled},
      {"pending_labels", s.pending_labels},
      {"label_failures", s.label_failures},
      {"entries", s.entries},
      {"hit_rate", s.hit_rate},
      {"error_rate", s.error_rate},
      {"uptime_s", uptime},
      {"policy", policy_name(cache_->policy())},
      {"policy_parameter", policy_parameter(cache_->policy())},
      {"notes",
       {{"tp", "live exploits are not re-checked against the model, so every hit counts as a "
               "true positive; fp and error_rate stay 0 unless hits are adjudicated offline"},
        {"labeled", "explores whose correctness label has been committed"}}},
  };
  return json_response(200, body);
}

ServiceResponse ProxyService::handle_flush(const std::string& authorization) {
  if (!config_.admin_enabled) return error_response(403, "admin endpoints are disabled");
  if (!config_.admin_token_env.empty()) {
    const char* token = std::getenv(config_.admin_token_env.c_str());
    if (token == nullptr || *token == '\0' || authorization != std::string("Bearer ") + token) {
      return error_response(401, "invalid admin token");
    }
  }
  std::unique_lock flush_guard(impl_->flush_mutex);
  std::size_t bytes = 0;
  try {
    cache_->drain();
    bytes = snapshot();
  } catch (const std::exception& e) {
    return error_response(500, std::string("snapshot failed, cache left unchanged: ") + e.what());
  }
  const std::size_t dropped = cache_->entry_count();
  cache_->clear();
  json body = {{"ok", true}, {"entries_dropped", dropped}};
  if (config_.snapshot_path) {
    body["snapshot_path"] = *config_.snapshot_path;
    body["snapshot_bytes"] = bytes;
  }
  return json_response(200, body);
}

ServiceResponse ProxyService::handle_healthz() const {
  return json_response(200, {{"status", "ok"}});
}

std::size_t ProxyService::snapshot() {
  if (!config_.snapshot_path) return 0;
  // export_state copies under a shared lock; the disk write happens outside it.
  CacheState state = cache_->export_state();
  std::lock_guard lock(impl_->snapshot_mutex);
  return save_snapshot(state, *config_.snapshot_path);
}

void ProxyService::snapshot_loop() {
  std::unique_lock lock(impl_->stop_mutex);
  while (!impl_->stopping) {
    if (impl_->stop_cv.wait_for(lock, *config_.snapshot_interval, [this] { return impl_->stopping; })) {
      break;
    }
    lock.unlock();
    try {
      snapshot();
    } catch (const std::exception& e) {
      std::cerr << "vcache-proxy: periodic snapshot failed: " << e.what() << "\n";
    }
    lock.lock();
  }
}

int ProxyService::bind() {
  if (impl_->port >= 0) return impl_->port;
  auto& server = impl_->server;
  if (config_.listen_port == 0) {
    impl_->port = server.bind_to_any_port(config_.listen_host);
  } else if (server.bind_to_port(config_.listen_host, config_.listen_port)) {
    impl_->port = config_.listen_port;
  }
  if (impl_->port < 0) {
    throw Error("cannot listen on " + config_.listen_host + ":" + std::to_string(config_.listen_port));
  }
  return impl_->port;
}

int ProxyService::start() {
  const int port = bind();
  impl_->server_thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return port;
}

void ProxyService::run() {
  bind();
  impl_->server.listen_after_bind();
}

void ProxyService::stop() {
  impl_->server.stop();
  if (impl_->server_thread.joinable()) impl_->server_thread.join();
}

}  // namespace vcache
