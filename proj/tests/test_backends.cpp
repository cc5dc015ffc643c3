#include <cstdlib>
#include <random>

#include <gtest/gtest.h>

#include "support/fake_upstream.hpp"
#include "vcache/backends.hpp"

using namespace vcache;
using vcache::testing::FakeUpstream;
using vcache::testing::fast_options;

TEST(MockEmbedding, DeterministicAndUnitNorm) {
  MockEmbeddingBackend a(64, 7), b(64, 7);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 1000; ++i) {
    std::string text;
    const int len = 1 + rng() % 40;
    for (int k = 0; k < len; ++k) text += static_cast<char>(32 + rng() % 95);
    const auto x = a.embed({text, std::nullopt});
    const auto y = b.embed({text, std::nullopt});
    ASSERT_EQ(x.dim(), 64u);
    ASSERT_EQ(x.to_std(), y.to_std());  // bitwise
    ASSERT_NEAR(x.values().norm(), 1.0, 1e-12);
  }
}

TEST(MockEmbedding, SeedAndTextMatter) {
  MockEmbeddingBackend a(16, 1), b(16, 2);
  EXPECT_NE(a.embed({"hello", std::nullopt}), b.embed({"hello", std::nullopt}));
  EXPECT_NE(a.embed({"hello", std::nullopt}), a.embed({"hello!", std::nullopt}));
  EXPECT_THROW(a.embed({"", std::nullopt}), BackendError);
  EXPECT_THROW(MockEmbeddingBackend(0, 1), ConfigError);
}

TEST(PrecomputedEmbedding, LookupById) {
  PrecomputedEmbeddingBackend backend;
  backend.add(3, EmbeddingVector{1.0, 2.0});
  EXPECT_EQ(backend.embed({"anything", 3}), (EmbeddingVector{1.0, 2.0}));
  EXPECT_THROW(backend.embed({"anything", 4}), BackendError);
  EXPECT_THROW(backend.embed({"anything", std::nullopt}), BackendError);
}

TEST(OracleChat, Examples) {
  OracleChatBackend oracle;
  oracle.add(7, "Books");
  EXPECT_EQ(oracle.generate({"what category?", 7}), "Books");
  EXPECT_THROW(oracle.generate({"what category?", 8}), BackendError);
  EXPECT_THROW(oracle.generate({"", 7}), BackendError);
}

TEST(ScriptedChat, QueueAndRecording) {
  ScriptedChatBackend chat({"A"});
  EXPECT_EQ(chat.generate({"p1", std::nullopt}), "A");
  EXPECT_THROW(chat.generate({"p2", std::nullopt}), BackendError);
  chat.push_failure("boom");
  EXPECT_THROW(chat.generate({"p3", std::nullopt}), BackendError);
  EXPECT_EQ(chat.call_count(), 3u);
  EXPECT_EQ(chat.calls(), (std::vector<std::string>{"p1", "p2", "p3"}));
  EXPECT_THROW(chat.generate({"", std::nullopt}), BackendError);
}

TEST(HttpEmbedding, RetriesTransientFailures) {
  FakeUpstream upstream;
  upstream.set_embedding("hello", {0.6, 0.8});
  upstream.transient_embed_failures = 2;
  HttpEmbeddingBackend backend(fast_options(upstream.url("/v1/embeddings"), 3));
  EXPECT_EQ(backend.embed({"hello", std::nullopt}), (EmbeddingVector{0.6, 0.8}));
  EXPECT_EQ(upstream.embed_calls, 3);
}

TEST(HttpEmbedding, ExhaustedRetries) {
  FakeUpstream upstream;
  upstream.transient_embed_failures = 5;
  HttpEmbeddingBackend backend(fast_options(upstream.url("/v1/embeddings"), 2));
  EXPECT_THROW(backend.embed({"hello", std::nullopt}), BackendError);
  EXPECT_EQ(upstream.embed_calls, 3);
}

TEST(HttpEmbedding, ConnectionRefused) {
  int port;
  {
    FakeUpstream gone;
    port = std::stoi(gone.url("").substr(std::string("http://127.0.0.1:").size()));
  }
  HttpEmbeddingBackend backend(
      fast_options("http://127.0.0.1:" + std::to_string(port) + "/v1/embeddings", 1));
  EXPECT_THROW(backend.embed({"hello", std::nullopt}), BackendError);
}

TEST(HttpChat, GenerateAndAuth) {
  FakeUpstream upstream;
  ::setenv("VCACHE_TEST_KEY", "sekret", 1);
  auto options = fast_options(upstream.url("/v1/chat/completions"));
  options.auth_env_var = "VCACHE_TEST_KEY";
  HttpChatBackend chat(options);
  EXPECT_EQ(chat.generate({"ping", std::nullopt}), FakeUpstream::answer_prefix() + "ping");
  EXPECT_EQ(upstream.last_auth(), "Bearer sekret");
  ::unsetenv("VCACHE_TEST_KEY");
}

TEST(HttpChat, ForwardKeepsBodyVerbatim) {
  FakeUpstream upstream;
  HttpChatBackend chat(fast_options(upstream.url("/v1/chat/completions")));
  const std::string body = R"({"model":"m","messages":[{"role":"user","content":"hi"}]})";
  HttpReply reply = chat.forward(body);
  EXPECT_EQ(reply.status, 200);
  EXPECT_EQ(upstream.chat_bodies().back(), body);
  EXPECT_NE(reply.body.find("\"upstream_marker\": 1"), std::string::npos);
  EXPECT_EQ(extract_completion_text(reply.body), FakeUpstream::answer_prefix() + "hi");
}

TEST(HttpChat, NonSuccessIsAnError) {
  FakeUpstream upstream;
  upstream.chat_status = 400;
  HttpChatBackend chat(fast_options(upstream.url("/v1/chat/completions"), 3));
  EXPECT_THROW(chat.generate({"x", std::nullopt}), BackendError);
  EXPECT_EQ(upstream.chat_calls, 1);  // 4xx is not retried
}

TEST(HttpBackend, RejectsRelativeEndpoint) {
  EXPECT_THROW(HttpChatBackend(fast_options("/v1/chat/completions")), ConfigError);
}

TEST(ExtractCompletionText, Malformed) {
  EXPECT_THROW(extract_completion_text("{}"), BackendError);
  EXPECT_THROW(extract_completion_text("not json"), BackendError);
}
