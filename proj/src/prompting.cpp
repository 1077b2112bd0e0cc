#include "cotstream/prompting.hpp"

#include "cotstream/error.hpp"
#include "cotstream/hash.hpp"
#include "cotstream/json_io.hpp"

namespace cotstream {

std::string render_prompt(const Prompt& prompt, std::string_view question) {
  std::string out;
  if (prompt.demos.empty()) {
    out.append("Q: ").append(question).append("\nA: ").append(kZeroShotTrigger);
    return out;
  }
  for (const auto& d : prompt.demos) {
    out.append("Q: ").append(d.question).append("\nA: ").append(d.rationale.text);
    out.append(" The answer is ").append(d.answer_text).append(".\n\n");
  }
  out.append("Q: ").append(question).append("\nA:");
  return out;
}

Prompt enforce_budget(Prompt prompt, std::string_view question, const TokenCounter& count) {
  Prompt bare{{}, prompt.budget_tokens, prompt.template_id};
  if (count(render_prompt(bare, question)) > prompt.budget_tokens) {
    throw Error(ErrorKind::Budget, "token budget " + std::to_string(prompt.budget_tokens) +
                                       " cannot hold the bare question");
  }
  std::size_t evict = 0;
  // Render once per candidate; demo lists are short enough that this stays cheap.
  while (evict < prompt.demos.size()) {
    Prompt trial{std::vector<Demonstration>(prompt.demos.begin() + static_cast<std::ptrdiff_t>(evict),
                                            prompt.demos.end()),
                 prompt.budget_tokens, prompt.template_id};
    if (count(render_prompt(trial, question)) <= prompt.budget_tokens) break;
    ++evict;
  }
  prompt.demos.erase(prompt.demos.begin(), prompt.demos.begin() + static_cast<std::ptrdiff_t>(evict));
  return prompt;
}

Prompt enforce_budget_all(Prompt prompt, std::span<const std::string> questions,
                          const TokenCounter& count) {
  prompt = enforce_budget(std::move(prompt), "", count);
  for (const auto& q : questions) prompt = enforce_budget(std::move(prompt), q, count);
  return prompt;
}

PromptStats prompt_stats(const Prompt& prompt) {
  PromptStats s;
  s.n_demos = prompt.demos.size();
  s.token_total = estimate_tokens(render_prompt(prompt, ""));
  if (s.n_demos == 0) return s;
  std::size_t wrong = 0;
  std::size_t depth = 0;
  for (const auto& d : prompt.demos) {
    if (!d.verdict.correct) ++wrong;
    depth += d.rationale.newline_count;
  }
  s.wrong_fraction = static_cast<double>(wrong) / static_cast<double>(s.n_demos);
  s.mean_newline_depth = static_cast<double>(depth) / static_cast<double>(s.n_demos);
  return s;
}

std::string prompt_hash(const Prompt& prompt) {
  return sha256_hex(nlohmann::json(prompt).dump());
}

}  // namespace cotstream
