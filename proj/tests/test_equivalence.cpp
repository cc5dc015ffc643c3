#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "vcache/backends.hpp"
#include "vcache/equivalence.hpp"

using namespace vcache;

TEST(ExactMatch, Examples) {
  EXPECT_TRUE(exact_match("Books", "books ").equal);
  EXPECT_FALSE(exact_match("yes", "no").equal);
  EXPECT_TRUE(exact_match("a  b", "a b").equal);
  EXPECT_TRUE(exact_match("\tHello\n World ", "hello world").equal);
  EXPECT_FALSE(exact_match("ab", "a b").equal);
  auto v = exact_match("x", "x");
  EXPECT_EQ(v.method, EquivalenceMethod::ExactMatch);
  EXPECT_FALSE(v.judge_raw);
}

TEST(ExactMatch, NormalizeResponse) {
  EXPECT_EQ(normalize_response("  The  Quick\t\tFox \n"), "the quick fox");
  EXPECT_EQ(normalize_response(""), "");
  EXPECT_EQ(normalize_response("   "), "");
}

TEST(ExactMatch, IsAnEquivalenceRelation) {
  std::mt19937_64 rng(3);
  const std::string alphabet = "aAbB  \t";
  std::vector<std::string> words;
  for (int i = 0; i < 150; ++i) {
    std::string w;
    const int len = rng() % 6;
    for (int k = 0; k < len; ++k) w += alphabet[rng() % alphabet.size()];
    words.push_back(w);
  }
  for (const auto& a : words) {
    EXPECT_TRUE(exact_match(a, a).equal);
    for (const auto& b : words) {
      const bool ab = exact_match(a, b).equal;
      EXPECT_EQ(ab, exact_match(b, a).equal);
      if (!ab) continue;
      for (const auto& c : words) {
        if (exact_match(b, c).equal) {
          EXPECT_TRUE(exact_match(a, c).equal);
        }
      }
    }
  }
}

TEST(ParseJudgeReply, Examples) {
  auto yes = parse_judge_reply("Yes");
  EXPECT_TRUE(yes.equal);
  EXPECT_EQ(yes.method, EquivalenceMethod::Judge);
  EXPECT_EQ(yes.judge_raw, "Yes");
  EXPECT_FALSE(parse_judge_reply("no.").equal);
  auto maybe = parse_judge_reply("maybe");
  EXPECT_FALSE(maybe.equal);
  EXPECT_EQ(maybe.judge_raw, "maybe");
  EXPECT_TRUE(parse_judge_reply("  YES, they match").equal);
  EXPECT_FALSE(parse_judge_reply("yesterday").equal);
  EXPECT_FALSE(parse_judge_reply("").equal);
}

TEST(JudgeTemplate, BuiltinMatchesShippedFile) {
  auto builtin = JudgeTemplate::builtin();
  auto file = JudgeTemplate::from_file(std::string(VCACHE_DATA_DIR) + "/judge_prompt_v1.txt");
  EXPECT_EQ(builtin.text(), file.text());
  EXPECT_EQ(builtin.version(), "v1");
}

TEST(JudgeTemplate, RenderAndValidation) {
  JudgeTemplate t("Q={prompt} A={response_a} B={response_b}");
  EXPECT_EQ(t.render("p", "x", "y"), "Q=p A=x B=y");
  EXPECT_THROW(JudgeTemplate("only {prompt} and {response_a}"), ConfigError);
  EXPECT_THROW(JudgeTemplate::from_file("/nonexistent/template.txt"), ConfigError);
  // Placeholders inside substituted text are not expanded again.
  EXPECT_EQ(t.render("{response_a}", "x", "y"), "Q={response_a} A=x B=y");
}

TEST(JudgeEquivalence, UsesBackendAndTemplate) {
  ScriptedChatBackend judge({"Yes", "No", "unsure"});
  JudgeTemplate t("{prompt}|{response_a}|{response_b}");
  EXPECT_TRUE(judge_equivalence("q", "a", "b", judge, t).equal);
  EXPECT_FALSE(judge_equivalence("q", "a", "c", judge, t).equal);
  auto v = judge_equivalence("q", "a", "d", judge, t);
  EXPECT_FALSE(v.equal);
  EXPECT_EQ(v.judge_raw, "unsure");
  EXPECT_EQ(judge.calls(), (std::vector<std::string>{"q|a|b", "q|a|c", "q|a|d"}));
}

TEST(JudgeEquivalence, BackendFailurePropagates) {
  ScriptedChatBackend judge;
  judge.push_failure("judge offline");
  EXPECT_THROW(judge_equivalence("q", "a", "b", judge), BackendError);
}
