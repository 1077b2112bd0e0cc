#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace cotstream {

enum class TaskKind { Arithmetic, YesNo, SymbolicString };

std::string_view to_string(TaskKind task);
// Accepts "arithmetic", "yesno" / "yes_no", "symbolic" / "symbolic_string".
TaskKind task_from_string(std::string_view name);

struct Verdict {
  bool correct = false;
  std::string predicted;  // canonical extraction, empty when nothing was extractable

  bool operator==(const Verdict&) const = default;
};

// Pulls the canonical answer out of a completion. The search scope is the
// text after the last case-insensitive "answer is", or the whole completion.
//   Arithmetic:     last numeric literal; '$' and thousands separators dropped.
//   YesNo:          first standalone yes/no token, lowercased.
//   SymbolicString: last maximal run of ASCII letters, lowercased.
// Returns "" when nothing matches.
std::string extract_answer(std::string_view completion, TaskKind task);

// Canonical decimal form of a numeric literal ("018.50" -> "18.5", "-0" -> "0").
// nullopt when the text is not a plain decimal number.
std::optional<std::string> canonical_number(std::string_view literal);

Verdict grade(std::string_view predicted, std::string_view gold, TaskKind task);

}  // namespace cotstream
