#include "cotstream/grading.hpp"

#include <charconv>
#include <cmath>

#include "cotstream/error.hpp"
#include "text_util.hpp"

namespace cotstream {

namespace {

constexpr double kNumericTolerance = 1e-6;

std::string_view answer_scope(std::string_view completion) {
  constexpr std::string_view anchor = "answer is";
  auto pos = detail::rfind_icase(completion, anchor);
  if (pos == std::string_view::npos) return completion;
  return completion.substr(pos + anchor.size());
}

// Scans for numeric literals: optional sign, digits with optional
// comma-grouped thousands, optional fraction. Keeps the last one.
std::string last_number(std::string_view scope) {
  std::string last;
  std::size_t i = 0;
  while (i < scope.size()) {
    if (!detail::is_digit(scope[i])) {
      ++i;
      continue;
    }
    std::size_t begin = i;
    bool negative = false;
    std::size_t back = begin;
    if (back > 0 && scope[back - 1] == '$') --back;
    if (back > 0 && scope[back - 1] == '-' &&
        (back < 2 || !detail::is_alnum(scope[back - 2]))) {
      negative = true;
    }

    std::string digits;
    std::size_t j = i;
    while (j < scope.size() && detail::is_digit(scope[j])) digits += scope[j++];
    // Grouping: ",ddd" repeated, only when the leading group has 1-3 digits.
    if (digits.size() <= 3) {
      while (j + 3 < scope.size() && scope[j] == ',' && detail::is_digit(scope[j + 1]) &&
             detail::is_digit(scope[j + 2]) && detail::is_digit(scope[j + 3]) &&
             (j + 4 >= scope.size() || !detail::is_digit(scope[j + 4]))) {
        digits.append(scope.substr(j + 1, 3));
        j += 4;
      }
    }
    if (j + 1 < scope.size() && scope[j] == '.' && detail::is_digit(scope[j + 1])) {
      digits += '.';
      ++j;
      while (j < scope.size() && detail::is_digit(scope[j])) digits += scope[j++];
    }
    if (negative) digits.insert(digits.begin(), '-');
    if (auto canon = canonical_number(digits)) last = *canon;
    i = j;
  }
  return last;
}

std::string first_yes_no(std::string_view scope) {
  std::size_t i = 0;
  while (i < scope.size()) {
    if (!detail::is_alnum(scope[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < scope.size() && detail::is_alnum(scope[j])) ++j;
    auto word = detail::to_lower(scope.substr(i, j - i));
    if (word == "yes" || word == "no") return word;
    i = j;
  }
  return {};
}

std::string last_alpha_run(std::string_view scope) {
  std::size_t end = scope.size();
  while (end > 0 && !detail::is_alpha(scope[end - 1])) --end;
  if (end == 0) return {};
  std::size_t begin = end;
  while (begin > 0 && detail::is_alpha(scope[begin - 1])) --begin;
  return detail::to_lower(scope.substr(begin, end - begin));
}

std::optional<double> parse_number(std::string_view s) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

}  // namespace

std::string_view to_string(TaskKind task) {
  switch (task) {
    case TaskKind::Arithmetic: return "arithmetic";
    case TaskKind::YesNo: return "yesno";
    case TaskKind::SymbolicString: return "symbolic";
  }
  return "arithmetic";
}

TaskKind task_from_string(std::string_view name) {
  auto lower = detail::to_lower(name);
  if (lower == "arithmetic") return TaskKind::Arithmetic;
  if (lower == "yesno" || lower == "yes_no") return TaskKind::YesNo;
  if (lower == "symbolic" || lower == "symbolic_string") return TaskKind::SymbolicString;
  throw Error(ErrorKind::Validation,
              "unknown task '" + std::string(name) + "' (expected arithmetic, yesno or symbolic)");
}

std::optional<std::string> canonical_number(std::string_view literal) {
  std::string_view s = literal;
  bool negative = false;
  if (!s.empty() && (s.front() == '-' || s.front() == '+')) {
    negative = s.front() == '-';
    s.remove_prefix(1);
  }
  auto dot = s.find('.');
  std::string_view whole = s.substr(0, dot);
  std::string_view frac = dot == std::string_view::npos ? std::string_view{} : s.substr(dot + 1);
  if (whole.empty()) return std::nullopt;
  for (char c : whole) if (!detail::is_digit(c)) return std::nullopt;
  if (dot != std::string_view::npos && frac.empty()) return std::nullopt;
  for (char c : frac) if (!detail::is_digit(c)) return std::nullopt;

  while (whole.size() > 1 && whole.front() == '0') whole.remove_prefix(1);
  while (!frac.empty() && frac.back() == '0') frac.remove_suffix(1);

  std::string out(whole);
  if (!frac.empty()) {
    out += '.';
    out += frac;
  }
  if (negative && out != "0") out.insert(out.begin(), '-');
  return out;
}

std::string extract_answer(std::string_view completion, TaskKind task) {
  auto scope = answer_scope(completion);
  switch (task) {
    case TaskKind::Arithmetic: return last_number(scope);
    case TaskKind::YesNo: return first_yes_no(scope);
    case TaskKind::SymbolicString: return last_alpha_run(scope);
  }
  return {};
}

Verdict grade(std::string_view predicted, std::string_view gold, TaskKind task) {
  Verdict v{false, std::string(predicted)};
  if (predicted.empty()) return v;
  if (task == TaskKind::Arithmetic) {
    auto p = parse_number(predicted);
    auto g = parse_number(gold);
    if (p && g) {
      v.correct = std::fabs(*p - *g) <= kNumericTolerance;
      return v;
    }
  }
  v.correct = predicted == gold;
  return v;
}

}  // namespace cotstream
