#include <algorithm>
#include <bit>
#include <cstdio>
#include <sstream>

#include "cotstream/backend.hpp"
#include "cotstream/error.hpp"
#include "cotstream/hash.hpp"
#include "cotstream/prompting.hpp"
#include "text_util.hpp"

namespace cotstream {

namespace {

constexpr std::string_view kResultLead = "So the result is ";
constexpr std::string_view kBlockSep = "\n\nQ: ";

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

struct ParsedDemo {
  std::string_view question;
  std::string_view rationale;
  std::string_view answer;
};

struct ParsedPrompt {
  std::vector<ParsedDemo> demos;
  std::string_view question;
};

// Splits "Q: <q>\nA: <rest>" into its two halves.
std::pair<std::string_view, std::string_view> split_block(std::string_view block) {
  if (block.starts_with("Q: ")) block.remove_prefix(3);
  auto a = block.find("\nA:");
  if (a == std::string_view::npos) return {block, {}};
  auto rest = block.substr(a + 3);
  if (rest.starts_with(" ")) rest.remove_prefix(1);
  return {block.substr(0, a), rest};
}

ParsedPrompt parse_prompt(std::string_view prompt) {
  ParsedPrompt parsed;
  std::vector<std::string_view> blocks;
  std::size_t start = 0;
  while (true) {
    auto pos = prompt.find(kBlockSep, start);
    if (pos == std::string_view::npos) {
      blocks.push_back(prompt.substr(start));
      break;
    }
    blocks.push_back(prompt.substr(start, pos - start));
    start = pos + 2;  // keep the "Q: " on the next block
  }
  for (std::size_t i = 0; i + 1 < blocks.size(); ++i) {
    auto [q, rest] = split_block(blocks[i]);
    ParsedDemo d{q, rest, {}};
    auto anchor = detail::rfind_icase(rest, " The answer is ");
    if (anchor != std::string_view::npos) {
      d.rationale = rest.substr(0, anchor);
      d.answer = rest.substr(anchor + 15);
    }
    parsed.demos.push_back(d);
  }
  parsed.question = split_block(blocks.back()).first;
  return parsed;
}

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return canonical_number(buf).value_or(buf);
}

}  // namespace

std::vector<DepthWeight> MockScript::default_depths() {
  return {{0, 1.0}, {1, 2.0}, {2, 3.0}, {3, 3.0}, {4, 3.0}, {5, 2.0}, {6, 2.0}, {7, 1.0}};
}

void AnswerKey::add(const Dataset& dataset) {
  for (const auto& s : dataset.samples) by_question_[s.question] = s;
}

void AnswerKey::add(std::string question, std::string gold, TaskKind task) {
  Sample s{question, question, std::move(gold), task};
  by_question_[std::move(question)] = std::move(s);
}

const Sample* AnswerKey::find(std::string_view question) const {
  auto it = by_question_.find(std::string(question));
  return it == by_question_.end() ? nullptr : &it->second;
}

MockBackend::MockBackend(MockScript script, AnswerKey key)
    : script_(std::move(script)), key_(std::move(key)) {
  if (script_.depth_distribution.empty())
    throw Error(ErrorKind::Validation, "mock depth distribution is empty");
  double total = 0.0;
  for (const auto& w : script_.depth_distribution) {
    if (w.weight < 0.0) throw Error(ErrorKind::Validation, "mock depth weights must be >= 0");
    total += w.weight;
  }
  if (total <= 0.0) throw Error(ErrorKind::Validation, "mock depth weights sum to zero");
}

std::string MockBackend::identity() const {
  std::ostringstream os;
  os << "mock(seed=" << script_.seed << ",correct_base=" << script_.correct_base
     << ",shallow_bonus=" << script_.shallow_bonus << ",wrong_penalty=" << script_.wrong_penalty
     << ",xi=" << script_.shallow_xi << ")";
  return os.str();
}

void MockBackend::push_scripted(std::string text) {
  std::lock_guard lock(mu_);
  scripted_.push_back(std::move(text));
}

std::string MockBackend::rationale_text(std::size_t newline_count, std::string_view answer) {
  std::string text;
  for (std::size_t i = 1; i <= newline_count; ++i) {
    text += "Step " + std::to_string(i) + ": work through part " + std::to_string(i) +
            " of the question.\n";
  }
  text.append(kResultLead).append(answer).append(".");
  return text;
}

std::string MockBackend::wrong_answer(std::string_view gold, TaskKind task) {
  switch (task) {
    case TaskKind::Arithmetic: {
      auto canon = canonical_number(gold);
      if (!canon) return std::string(gold) + "1";
      if (canon->find('.') == std::string::npos && canon->size() < 18)
        return std::to_string(std::stoll(*canon) + 1);
      return format_number(std::stod(*canon) + 1.0);
    }
    case TaskKind::YesNo: return gold == "yes" ? "no" : "yes";
    case TaskKind::SymbolicString: return std::string(gold) + "z";
  }
  return std::string(gold) + "z";
}

PromptComposition MockBackend::composition(std::string_view prompt) const {
  PromptComposition c;
  auto parsed = parse_prompt(prompt);
  c.n_demos = parsed.demos.size();
  if (c.n_demos == 0) return c;
  std::size_t shallow = 0;
  std::size_t wrong = 0;
  for (const auto& d : parsed.demos) {
    if (classify_depth(count_newlines(d.rationale), script_.shallow_xi) == DepthClass::Shallow)
      ++shallow;
    if (const auto* s = key_.find(d.question)) {
      if (!grade(extract_answer(d.answer, s->task), s->gold, s->task).correct) ++wrong;
    }
  }
  c.shallow_fraction = static_cast<double>(shallow) / static_cast<double>(c.n_demos);
  c.wrong_fraction = static_cast<double>(wrong) / static_cast<double>(c.n_demos);
  return c;
}

MockDecision MockBackend::decide(std::string_view prompt, double temperature,
                                 std::uint64_t attempt) const {
  MockDecision d;
  auto parsed = parse_prompt(prompt);
  const auto* sample = key_.find(parsed.question);
  auto comp = composition(prompt);
  d.probability = std::clamp(script_.correct_base + script_.shallow_bonus * comp.shallow_fraction -
                                 script_.wrong_penalty * comp.wrong_fraction,
                             0.0, 1.0);

  const auto s = splitmix64(script_.seed ^
                            splitmix64(fnv1a64(prompt) ^
                                       splitmix64(std::bit_cast<std::uint64_t>(temperature) ^
                                                  splitmix64(attempt))));
  const double u_correct = unit_interval(splitmix64(s ^ 1));
  const double u_depth = unit_interval(splitmix64(s ^ 2));

  double total = 0.0;
  for (const auto& w : script_.depth_distribution) total += w.weight;
  double target = u_depth * total;
  d.newline_count = script_.depth_distribution.back().newline_count;
  for (const auto& w : script_.depth_distribution) {
    if (target < w.weight) {
      d.newline_count = w.newline_count;
      break;
    }
    target -= w.weight;
  }

  if (sample == nullptr) return d;
  d.correct = u_correct < d.probability;
  d.answer = d.correct ? sample->gold : wrong_answer(sample->gold, sample->task);
  return d;
}

std::string MockBackend::simulate(std::string_view prompt, double temperature) {
  std::uint64_t attempt = 0;
  if (temperature > 0.0) {
    std::lock_guard lock(mu_);
    attempt = attempts_[fnv1a64(prompt)]++;
  }

  // Stage 2 of zero-shot CoT: answer with whatever the rationale concluded.
  if (ends_with(prompt, kAnswerTrigger)) {
    auto body = prompt.substr(0, prompt.size() - kAnswerTrigger.size());
    auto lead = body.rfind(kResultLead);
    if (lead != std::string_view::npos) {
      auto answer = body.substr(lead + kResultLead.size());
      if (ends_with(answer, ".")) answer.remove_suffix(1);
      return " " + std::string(answer) + ".";
    }
    auto d = decide(body, temperature, attempt);
    return d.answer.empty() ? std::string(" unknown.") : " " + d.answer + ".";
  }

  auto d = decide(prompt, temperature, attempt);
  if (d.answer.empty()) return " I am not sure how to solve this.";
  auto rationale = rationale_text(d.newline_count, d.answer);
  if (ends_with(prompt, kZeroShotTrigger)) return " " + rationale;
  return " " + rationale + " The answer is " + d.answer + ".";
}

CompletionResponse MockBackend::complete(const CompletionRequest& request) {
  ++calls_;
  std::string text;
  bool scripted = false;
  {
    std::lock_guard lock(mu_);
    if (!scripted_.empty()) {
      text = std::move(scripted_.front());
      scripted_.pop_front();
      scripted = true;
    }
  }
  if (!scripted) text = simulate(request.prompt, request.temperature);

  CompletionResponse r;
  r.prompt_tokens = estimate_tokens(request.prompt);
  r.completion_tokens = estimate_tokens(text);
  if (r.completion_tokens > request.max_tokens) {
    text.resize(request.max_tokens * 4);
    r.completion_tokens = request.max_tokens;
    r.finish_reason = FinishReason::Length;
  }
  r.text = std::move(text);
  return r;
}

}  // namespace cotstream
