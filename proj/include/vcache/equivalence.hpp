#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace vcache {

class ChatBackend;

enum class EquivalenceMethod { ExactMatch, Judge, Oracle };

struct EquivalenceVerdict {
  bool equal = false;
  EquivalenceMethod method = EquivalenceMethod::ExactMatch;
  std::optional<std::string> judge_raw;  // set iff method == Judge
};

/// Trim, ASCII case-fold, and collapse internal whitespace runs to one space.
std::string normalize_response(std::string_view text);

EquivalenceVerdict exact_match(std::string_view a, std::string_view b);

/// Judge prompt with {prompt}, {response_a} and {response_b} placeholders.
class JudgeTemplate {
 public:
  /// The template shipped as data/judge_prompt_v1.txt.
  static JudgeTemplate builtin();
  static JudgeTemplate from_file(const std::string& path);
  explicit JudgeTemplate(std::string text, std::string version = "custom");

  std::string render(std::string_view prompt, std::string_view response_a,
                     std::string_view response_b) const;
  const std::string& text() const { return text_; }
  const std::string& version() const { return version_; }

 private:
  std::string text_;
  std::string version_;
};

/// Reads the judge's leading token: "yes" -> equal, "no" -> not equal,
/// anything else -> not equal. The raw reply is always kept.
EquivalenceVerdict parse_judge_reply(std::string_view reply);

/// Asks `backend` whether `candidate` and `reference` are equivalent answers
/// to `prompt`. Backend errors propagate.
EquivalenceVerdict judge_equivalence(std::string_view prompt, std::string_view candidate,
                                     std::string_view reference, ChatBackend& backend,
                                     const JudgeTemplate& judge_template = JudgeTemplate::builtin());

}  // namespace vcache
