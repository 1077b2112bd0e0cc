#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cotstream/grading.hpp"
#include "cotstream/rationale.hpp"

namespace cotstream {

inline constexpr std::string_view kDefaultTemplate = "qa-v1";
inline constexpr std::size_t kDefaultBudgetTokens = 2048;
inline constexpr std::string_view kZeroShotTrigger = "Let's think step by step.";

// A question-rationale pair with its answer and verdict.
struct Demonstration {
  std::string sample_id;
  std::string question;
  Rationale rationale;
  std::string answer_text;
  Verdict verdict;
  std::size_t batch_of_origin = 1;

  bool operator==(const Demonstration&) const = default;
};

struct Prompt {
  std::vector<Demonstration> demos;
  std::size_t budget_tokens = kDefaultBudgetTokens;
  std::string template_id{kDefaultTemplate};

  bool operator==(const Prompt&) const = default;
};

struct PromptStats {
  std::size_t n_demos = 0;
  double wrong_fraction = 0.0;
  double mean_newline_depth = 0.0;
  std::size_t token_total = 0;  // tokens of the prompt rendered with an empty question

  bool operator==(const PromptStats&) const = default;
};

// Few-shot text: one "Q: ..\nA: <rationale> The answer is <a>.\n\n" block per
// demo, then "Q: <question>\nA:". With no demos this is the zero-shot form
// "Q: <question>\nA: Let's think step by step."
std::string render_prompt(const Prompt& prompt, std::string_view question);

// Evicts the oldest demos until the rendered query fits budget_tokens.
// Throws Error(Budget) when the bare question does not fit.
Prompt enforce_budget(Prompt prompt, std::string_view question,
                      const TokenCounter& count = estimate_tokens);

// Same, against every question in the list plus the empty question.
Prompt enforce_budget_all(Prompt prompt, std::span<const std::string> questions,
                          const TokenCounter& count = estimate_tokens);

PromptStats prompt_stats(const Prompt& prompt);

// SHA-256 of the prompt's canonical JSON form.
std::string prompt_hash(const Prompt& prompt);

}  // namespace cotstream
