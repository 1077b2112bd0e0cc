#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "cotstream/backend.hpp"
#include "cotstream/dataset.hpp"
#include "cotstream/prompting.hpp"

namespace cotstream {

enum class StrategyKind { ZeroShot, Concat, CorrectOnly, WrongSubstitute, ShallowReplace, DeepReplace };

std::string_view to_string(StrategyKind kind);
// Accepts the canonical names plus short forms: zero-shot, concat, correct,
// wrong, shallow, deep.
StrategyKind strategy_from_string(std::string_view name);

struct StrategyConfig {
  StrategyKind kind = StrategyKind::Concat;
  std::size_t xi = 3;
  std::size_t demo_cap = 8;
  std::size_t wrong_attempts = 8;
  double wrong_temperature = 0.7;

  void validate() const;  // throws Error(Validation)
  bool operator==(const StrategyConfig&) const = default;
};

// Everything a strategy may look at after a batch was evaluated.
struct BatchResult {
  std::size_t batch_index = 1;
  std::vector<Sample> samples;
  std::vector<Demonstration> demos;  // one per sample, same order
};

Prompt update_concat(Prompt prompt, std::span<const Demonstration> pairs);
Prompt update_correct_only(Prompt prompt, std::span<const Demonstration> pairs,
                           const StrategyConfig& cfg);
Prompt update_wrong_substitute(Prompt prompt, std::span<const Demonstration> pairs,
                               std::span<const Demonstration> wrong_pool,
                               const StrategyConfig& cfg);
Prompt update_shallow_replace(Prompt prompt, std::span<const Demonstration> pairs,
                              const StrategyConfig& cfg);
Prompt update_deep_replace(Prompt prompt, std::span<const Demonstration> pairs,
                           const StrategyConfig& cfg);

// Resamples zero-shot CoT at cfg.wrong_temperature until an answer grades
// Incorrect, at most cfg.wrong_attempts times.
std::optional<Demonstration> find_wrong_rationale(const Sample& sample, std::size_t batch_index,
                                                  Backend& backend, const StrategyConfig& cfg,
                                                  const DecodingParams& decoding = {});

// Wrong-demo pool for a batch, in batch order. Samples whose own demo is
// already Incorrect contribute it directly; the others are resampled. Stops
// once the pool holds cfg.demo_cap demos.
std::vector<Demonstration> build_wrong_pool(const BatchResult& batch, Backend& backend,
                                            const StrategyConfig& cfg,
                                            const DecodingParams& decoding = {});

Prompt apply_strategy(Prompt prompt, const BatchResult& batch, const StrategyConfig& cfg,
                      Backend& backend, const DecodingParams& decoding = {});

}  // namespace cotstream
