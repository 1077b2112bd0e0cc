#include "cotstream/strategies.hpp"

#include <algorithm>
#include <set>

#include "cotstream/error.hpp"
#include "text_util.hpp"

namespace cotstream {

namespace {

Prompt with_demos(const Prompt& base, std::vector<Demonstration> demos) {
  Prompt p{std::move(demos), base.budget_tokens, base.template_id};
  return enforce_budget(std::move(p), "");
}

// Correct demos of the requested depth class, sorted by newline count.
Prompt depth_replace(Prompt prompt, std::span<const Demonstration> pairs,
                     const StrategyConfig& cfg, DepthClass wanted) {
  std::vector<Demonstration> picked;
  for (const auto& d : pairs) {
    if (d.verdict.correct && classify_depth(d.rationale.newline_count, cfg.xi) == wanted)
      picked.push_back(d);
  }
  if (picked.empty()) return prompt;
  std::stable_sort(picked.begin(), picked.end(), [wanted](const auto& a, const auto& b) {
    return wanted == DepthClass::Shallow ? a.rationale.newline_count < b.rationale.newline_count
                                         : a.rationale.newline_count > b.rationale.newline_count;
  });
  if (picked.size() > cfg.demo_cap) picked.resize(cfg.demo_cap);
  return with_demos(prompt, std::move(picked));
}

}  // namespace

std::string_view to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::ZeroShot: return "zero_shot";
    case StrategyKind::Concat: return "concat";
    case StrategyKind::CorrectOnly: return "correct_only";
    case StrategyKind::WrongSubstitute: return "wrong_substitute";
    case StrategyKind::ShallowReplace: return "shallow_replace";
    case StrategyKind::DeepReplace: return "deep_replace";
  }
  return "concat";
}

StrategyKind strategy_from_string(std::string_view name) {
  auto n = detail::to_lower(name);
  std::replace(n.begin(), n.end(), '-', '_');
  if (n == "zero_shot" || n == "zeroshot") return StrategyKind::ZeroShot;
  if (n == "concat") return StrategyKind::Concat;
  if (n == "correct_only" || n == "correct") return StrategyKind::CorrectOnly;
  if (n == "wrong_substitute" || n == "wrong") return StrategyKind::WrongSubstitute;
  if (n == "shallow_replace" || n == "shallow") return StrategyKind::ShallowReplace;
  if (n == "deep_replace" || n == "deep") return StrategyKind::DeepReplace;
  throw Error(ErrorKind::Validation,
              "unknown strategy '" + std::string(name) +
                  "' (expected zero-shot, concat, correct, wrong, shallow or deep)");
}

void StrategyConfig::validate() const {
  if (xi < 1) throw Error(ErrorKind::Validation, "xi must be at least 1");
  if (demo_cap < 1) throw Error(ErrorKind::Validation, "demo_cap must be at least 1");
  if (wrong_attempts < 1) throw Error(ErrorKind::Validation, "wrong_attempts must be at least 1");
  if (!(wrong_temperature > 0.0 && wrong_temperature <= 2.0))
    throw Error(ErrorKind::Validation, "wrong_temperature must be in (0, 2]");
}

Prompt update_concat(Prompt prompt, std::span<const Demonstration> pairs) {
  if (pairs.empty()) return prompt;
  prompt.demos.insert(prompt.demos.end(), pairs.begin(), pairs.end());
  return enforce_budget(std::move(prompt), "");
}

Prompt update_correct_only(Prompt prompt, std::span<const Demonstration> pairs,
                           const StrategyConfig& cfg) {
  std::vector<Demonstration> picked;
  for (const auto& d : pairs) {
    if (picked.size() == cfg.demo_cap) break;
    if (d.verdict.correct) picked.push_back(d);
  }
  if (picked.empty()) return prompt;
  return with_demos(prompt, std::move(picked));
}

Prompt update_wrong_substitute(Prompt prompt, std::span<const Demonstration> pairs,
                               std::span<const Demonstration> wrong_pool,
                               const StrategyConfig& cfg) {
  const std::size_t wrong = std::min(wrong_pool.size(), cfg.demo_cap);
  std::set<std::string> substituted;
  for (std::size_t i = 0; i < wrong; ++i) substituted.insert(wrong_pool[i].sample_id);

  std::vector<Demonstration> correct;
  for (const auto& d : pairs) {
    if (d.verdict.correct && !substituted.contains(d.sample_id)) correct.push_back(d);
  }
  // Strict majority: correct < wrong, and the total stays under the cap.
  const std::size_t keep_correct =
      wrong == 0 ? 0 : std::min({correct.size(), wrong - 1, cfg.demo_cap - wrong});
  correct.resize(keep_correct);

  // Correct fillers go first so FIFO eviction can only raise the wrong share.
  std::vector<Demonstration> demos = std::move(correct);
  demos.insert(demos.end(), wrong_pool.begin(), wrong_pool.begin() + static_cast<std::ptrdiff_t>(wrong));
  return with_demos(prompt, std::move(demos));
}

Prompt update_shallow_replace(Prompt prompt, std::span<const Demonstration> pairs,
                              const StrategyConfig& cfg) {
  return depth_replace(std::move(prompt), pairs, cfg, DepthClass::Shallow);
}

Prompt update_deep_replace(Prompt prompt, std::span<const Demonstration> pairs,
                           const StrategyConfig& cfg) {
  return depth_replace(std::move(prompt), pairs, cfg, DepthClass::Deep);
}

std::optional<Demonstration> find_wrong_rationale(const Sample& sample, std::size_t batch_index,
                                                  Backend& backend, const StrategyConfig& cfg,
                                                  const DecodingParams& decoding) {
  for (std::size_t attempt = 0; attempt < cfg.wrong_attempts; ++attempt) {
    auto zs = zero_shot_cot(sample, backend, cfg.wrong_temperature, decoding);
    auto predicted = extract_answer(zs.answer_completion, sample.task);
    if (predicted.empty() || zs.empty_rationale) continue;
    auto verdict = grade(predicted, sample.gold, sample.task);
    if (verdict.correct) continue;
    return Demonstration{sample.id, sample.question, std::move(zs.rationale), predicted,
                         std::move(verdict), batch_index};
  }
  return std::nullopt;
}

std::vector<Demonstration> build_wrong_pool(const BatchResult& batch, Backend& backend,
                                            const StrategyConfig& cfg,
                                            const DecodingParams& decoding) {
  std::vector<Demonstration> pool;
  for (std::size_t i = 0; i < batch.samples.size() && pool.size() < cfg.demo_cap; ++i) {
    const auto& demo = batch.demos.at(i);
    if (!demo.verdict.correct) {
      if (!demo.verdict.predicted.empty() && !demo.rationale.text.empty()) pool.push_back(demo);
      continue;
    }
    if (auto wrong = find_wrong_rationale(batch.samples[i], batch.batch_index, backend, cfg, decoding))
      pool.push_back(std::move(*wrong));
  }
  return pool;
}

Prompt apply_strategy(Prompt prompt, const BatchResult& batch, const StrategyConfig& cfg,
                      Backend& backend, const DecodingParams& decoding) {
  switch (cfg.kind) {
    case StrategyKind::ZeroShot:
      return Prompt{{}, prompt.budget_tokens, prompt.template_id};
    case StrategyKind::Concat:
      return update_concat(std::move(prompt), batch.demos);
    case StrategyKind::CorrectOnly:
      return update_correct_only(std::move(prompt), batch.demos, cfg);
    case StrategyKind::WrongSubstitute: {
      auto pool = build_wrong_pool(batch, backend, cfg, decoding);
      return update_wrong_substitute(std::move(prompt), batch.demos, pool, cfg);
    }
    case StrategyKind::ShallowReplace:
      return update_shallow_replace(std::move(prompt), batch.demos, cfg);
    case StrategyKind::DeepReplace:
      return update_deep_replace(std::move(prompt), batch.demos, cfg);
  }
  return prompt;
}

}  // namespace cotstream
