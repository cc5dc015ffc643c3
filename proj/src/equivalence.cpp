#include "vcache/equivalence.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "vcache/backends.hpp"

namespace vcache {

namespace {

// Kept in sync with data/judge_prompt_v1.txt.
constexpr const char* kBuiltinJudgeTemplate =
    "You are comparing two answers to the same user request.\n"
    "\n"
    "Request:\n"
    "{prompt}\n"
    "\n"
    "Answer A:\n"
    "{response_a}\n"
    "\n"
    "Answer B:\n"
    "{response_b}\n"
    "\n"
    "Do Answer A and Answer B convey the same meaning, so that either one would be an "
    "acceptable reply to the request? Reply with a single word: yes or no.\n";

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

}  // namespace

std::string normalize_response(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

EquivalenceVerdict exact_match(std::string_view a, std::string_view b) {
  return {normalize_response(a) == normalize_response(b), EquivalenceMethod::ExactMatch,
          std::nullopt};
}

JudgeTemplate::JudgeTemplate(std::string text, std::string version)
    : text_(std::move(text)), version_(std::move(version)) {
  for (const char* key : {"{prompt}", "{response_a}", "{response_b}"}) {
    if (text_.find(key) == std::string::npos) {
      throw ConfigError(std::string("judge template is missing placeholder ") + key);
    }
  }
}

JudgeTemplate JudgeTemplate::builtin() { return JudgeTemplate(kBuiltinJudgeTemplate, "v1"); }

JudgeTemplate JudgeTemplate::from_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read judge template: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return JudgeTemplate(buf.str(), path);
}

std::string JudgeTemplate::render(std::string_view prompt, std::string_view response_a,
                                  std::string_view response_b) const {
  std::string out;
  out.reserve(text_.size() + prompt.size() + response_a.size() + response_b.size());
  std::size_t pos = 0;
  while (pos < text_.size()) {
    const std::size_t open = text_.find('{', pos);
    if (open == std::string::npos) {
      out.append(text_, pos, std::string::npos);
      break;
    }
    out.append(text_, pos, open - pos);
    const std::size_t close = text_.find('}', open);
    if (close == std::string::npos) {
      out.append(text_, open, std::string::npos);
      break;
    }
    const std::string_view key(text_.data() + open + 1, close - open - 1);
    if (key == "prompt") {
      out.append(prompt);
    } else if (key == "response_a") {
      out.append(response_a);
    } else if (key == "response_b") {
      out.append(response_b);
    } else {
      out.append(text_, open, close - open + 1);
    }
    pos = close + 1;
  }
  return out;
}

EquivalenceVerdict parse_judge_reply(std::string_view reply) {
  std::size_t i = 0;
  while (i < reply.size() && !std::isalpha(static_cast<unsigned char>(reply[i]))) {
    if (!is_space(reply[i]) && reply[i] != '"' && reply[i] != '\'' && reply[i] != '*') break;
    ++i;
  }
  std::string token;
  while (i < reply.size() && std::isalpha(static_cast<unsigned char>(reply[i]))) {
    token.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(reply[i]))));
    ++i;
  }
  return {token == "yes", EquivalenceMethod::Judge, std::string(reply)};
}

EquivalenceVerdict judge_equivalence(std::string_view prompt, std::string_view candidate,
                                     std::string_view reference, ChatBackend& backend,
                                     const JudgeTemplate& judge_template) {
  Prompt request{judge_template.render(prompt, candidate, reference), std::nullopt};
  return parse_judge_reply(backend.generate(request));
}

}  // namespace vcache
