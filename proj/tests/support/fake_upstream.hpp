#pragma once

// A local stand-in for a chat-completions + embeddings provider.

#include <atomic>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

// Eigen (via backends.hpp) must precede httplib, whose <resolv.h> defines _res.
#include "vcache/backends.hpp"

#include <httplib.h>
#include <json.hpp>

namespace vcache::testing {

class FakeUpstream {
 public:
  FakeUpstream() {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      {
        std::lock_guard lock(mutex_);
        last_auth_ = req.get_header_value("Authorization");
        chat_bodies_.push_back(req.body);
      }
      const int call = ++chat_calls;
      if (chat_down) {
        res.status = 503;
        res.set_content(R"({"error":"down"})", "application/json");
        return;
      }
      if (chat_status != 200) {
        res.status = chat_status;
        res.set_content(R"({"error": {"message": "rejected by upstream"}})", "application/json");
        return;
      }
      std::string text;
      auto body = nlohmann::json::parse(req.body, nullptr, false);
      if (!body.is_discarded() && body.contains("messages") && !body["messages"].empty()) {
        text = body["messages"].back().value("content", "");
      }
      // Deliberately idiosyncratic spacing and key order so any re-serialization shows.
      std::string reply = "{\"id\":  \"up-" + std::to_string(call) +
                          "\", \"object\":\"chat.completion\",\"choices\":[{\"index\":0,"
                          "\"message\":{\"role\":\"assistant\",\"content\":" +
                          nlohmann::json(answer_prefix() + text).dump() +
                          "},\"finish_reason\":\"stop\"}],  \"upstream_marker\": " +
                          std::to_string(call) + "}\n";
      res.set_content(reply, "application/json");
    });

    server_.Post("/v1/embeddings", [this](const httplib::Request& req, httplib::Response& res) {
      {
        std::lock_guard lock(mutex_);
        last_auth_ = req.get_header_value("Authorization");
      }
      ++embed_calls;
      if (embed_down) {
        res.status = 500;
        res.set_content(R"({"error":"down"})", "application/json");
        return;
      }
      if (transient_embed_failures > 0) {
        --transient_embed_failures;
        res.status = 503;
        res.set_content(R"({"error":"busy"})", "application/json");
        return;
      }
      auto body = nlohmann::json::parse(req.body);
      const std::string input = body.at("input").get<std::string>();
      std::vector<double> v;
      {
        std::lock_guard lock(mutex_);
        auto it = vectors_.find(input);
        if (it != vectors_.end()) v = it->second;
      }
      if (v.empty()) v = mock_.embed(Prompt{input, std::nullopt}).to_std();
      nlohmann::json reply = {{"object", "list"},
                              {"data", {{{"object", "embedding"}, {"index", 0}, {"embedding", v}}}}};
      res.set_content(reply.dump(), "application/json");
    });

    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~FakeUpstream() {
    server_.stop();
    thread_.join();
  }

  std::string url(const std::string& path) const {
    return "http://127.0.0.1:" + std::to_string(port_) + path;
  }

  void set_embedding(const std::string& text, std::vector<double> v) {
    std::lock_guard lock(mutex_);
    vectors_[text] = std::move(v);
  }

  std::string last_auth() const {
    std::lock_guard lock(mutex_);
    return last_auth_;
  }

  std::vector<std::string> chat_bodies() const {
    std::lock_guard lock(mutex_);
    return chat_bodies_;
  }

  static std::string answer_prefix() { return "answer to: "; }

  std::atomic<int> chat_calls{0};
  std::atomic<int> embed_calls{0};
  std::atomic<bool> chat_down{false};
  std::atomic<bool> embed_down{false};
  std::atomic<int> chat_status{200};
  std::atomic<int> transient_embed_failures{0};

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  mutable std::mutex mutex_;
  std::string last_auth_;
  std::vector<std::string> chat_bodies_;
  std::map<std::string, std::vector<double>> vectors_;
  MockEmbeddingBackend mock_{16, 99};
};

inline HttpBackendOptions fast_options(const std::string& endpoint, int retries = 0) {
  HttpBackendOptions o;
  o.endpoint = endpoint;
  o.model = "fake-model";
  o.retries = retries;
  o.initial_backoff = std::chrono::milliseconds(1);
  o.timeout = std::chrono::milliseconds(5000);
  return o;
}

}  // namespace vcache::testing
