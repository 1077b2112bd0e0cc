#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace cotstream {

enum class DepthClass { Shallow, Deep };

// How a rationale came to exist. Sampled rationales remember their temperature.
enum class OriginKind { ZeroShotGreedy, FewShotGreedy, Sampled, Scripted };

struct Origin {
  OriginKind kind = OriginKind::Scripted;
  double temperature = 0.0;

  bool operator==(const Origin&) const = default;
};

// Generated reasoning text plus the measurements strategies select on.
struct Rationale {
  std::string text;
  std::size_t newline_count = 0;
  std::vector<std::string> steps;
  std::size_t token_estimate = 1;
  Origin origin;

  bool operator==(const Rationale&) const = default;
};

std::size_t count_newlines(std::string_view text);

// Splits on ',' and '\n', trims each fragment and drops empty ones.
std::vector<std::string> split_steps(std::string_view text);

// Deep when newline_count >= xi. A count equal to xi is Deep, so Shallow
// selections are strictly below the threshold.
DepthClass classify_depth(std::size_t newline_count, std::size_t xi);

// ceil(chars / 4), never below 1.
std::size_t estimate_tokens(std::string_view text);

// Pluggable token counter; defaults to estimate_tokens.
using TokenCounter = std::function<std::size_t(std::string_view)>;

// Builds a Rationale from raw completion text. One trailing newline is
// stripped before measuring, surrounding spaces are trimmed.
Rationale make_rationale(std::string_view completion, Origin origin);

std::string_view to_string(DepthClass depth);
std::string_view to_string(OriginKind kind);
OriginKind origin_kind_from_string(std::string_view name);

}  // namespace cotstream
