#include "cotstream/rationale.hpp"

#include <algorithm>

#include "cotstream/error.hpp"
#include "text_util.hpp"

namespace cotstream {

std::size_t count_newlines(std::string_view text) {
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

std::vector<std::string> split_steps(std::string_view text) {
  std::vector<std::string> steps;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= text.size(); ++i) {
    if (i == text.size() || text[i] == ',' || text[i] == '\n') {
      auto fragment = detail::trim(text.substr(start, i - start));
      if (!fragment.empty()) steps.emplace_back(fragment);
      start = i + 1;
    }
  }
  return steps;
}

DepthClass classify_depth(std::size_t newline_count, std::size_t xi) {
  return newline_count >= xi ? DepthClass::Deep : DepthClass::Shallow;
}

std::size_t estimate_tokens(std::string_view text) {
  return std::max<std::size_t>(1, (text.size() + 3) / 4);
}

Rationale make_rationale(std::string_view completion, Origin origin) {
  if (!completion.empty() && completion.back() == '\n') completion.remove_suffix(1);
  Rationale r;
  r.text = std::string(detail::trim_spaces(completion));
  r.newline_count = count_newlines(r.text);
  r.steps = split_steps(r.text);
  r.token_estimate = estimate_tokens(r.text);
  r.origin = origin;
  return r;
}

std::string_view to_string(DepthClass depth) {
  return depth == DepthClass::Deep ? "deep" : "shallow";
}

std::string_view to_string(OriginKind kind) {
  switch (kind) {
    case OriginKind::ZeroShotGreedy: return "zero_shot_greedy";
    case OriginKind::FewShotGreedy: return "few_shot_greedy";
    case OriginKind::Sampled: return "sampled";
    case OriginKind::Scripted: return "scripted";
  }
  return "scripted";
}

OriginKind origin_kind_from_string(std::string_view name) {
  for (auto k : {OriginKind::ZeroShotGreedy, OriginKind::FewShotGreedy,
                 OriginKind::Sampled, OriginKind::Scripted}) {
    if (to_string(k) == name) return k;
  }
  throw Error(ErrorKind::Parse, "unknown rationale origin '" + std::string(name) + "'");
}

}  // namespace cotstream
