#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <semaphore>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cotstream/dataset.hpp"
#include "cotstream/rationale.hpp"

namespace cotstream {

struct CompletionRequest {
  std::string prompt;
  std::size_t max_tokens = 256;
  double temperature = 0.0;
  std::vector<std::string> stop{"Q:"};
  std::string model_id;

  bool operator==(const CompletionRequest&) const = default;
};

enum class FinishReason { Stop, Length, Error };

struct CompletionResponse {
  std::string text;
  FinishReason finish_reason = FinishReason::Stop;
  std::size_t prompt_tokens = 0;
  std::size_t completion_tokens = 0;

  bool operator==(const CompletionResponse&) const = default;
};

std::string_view to_string(FinishReason reason);
FinishReason finish_reason_from_string(std::string_view name);

// Sorted keys, no insignificant whitespace.
std::string canonical_request_json(const CompletionRequest& request);
// Hex SHA-256 of canonical_request_json.
std::string cache_key(const CompletionRequest& request);

class Backend {
 public:
  virtual ~Backend() = default;

  // Must be safe to call from several threads at once.
  virtual CompletionResponse complete(const CompletionRequest& request) = 0;
  virtual std::string identity() const = 0;
  virtual std::size_t max_in_flight() const { return 1; }
};

// Decoding parameters shared by every request of a run.
struct DecodingParams {
  std::string model_id = "text-davinci-002";
  std::size_t max_tokens = 256;
  std::vector<std::string> stop{"Q:"};

  bool operator==(const DecodingParams&) const = default;
};

// ---------------------------------------------------------------------------
// Scripted mock

struct DepthWeight {
  std::size_t newline_count = 0;
  double weight = 1.0;

  bool operator==(const DepthWeight&) const = default;
};

// Simulation knobs. Correctness probability for a query is
//   clamp(correct_base + shallow_bonus * shallow_fraction
//                      - wrong_penalty * wrong_fraction, 0, 1)
// where the fractions describe the demonstrations found in the prompt and
// "shallow" means fewer than shallow_xi newlines.
struct MockScript {
  std::uint64_t seed = 0;
  double correct_base = 0.6;
  double shallow_bonus = 0.2;
  double wrong_penalty = 0.1;
  std::size_t shallow_xi = 3;
  std::vector<DepthWeight> depth_distribution = default_depths();

  static std::vector<DepthWeight> default_depths();
  bool operator==(const MockScript&) const = default;
};

// Gold answers the mock uses to answer (and to judge demos it sees).
class AnswerKey {
 public:
  AnswerKey() = default;
  explicit AnswerKey(const Dataset& dataset) { add(dataset); }

  void add(const Dataset& dataset);
  void add(std::string question, std::string gold, TaskKind task);
  const Sample* find(std::string_view question) const;

 private:
  std::unordered_map<std::string, Sample> by_question_;
};

// What the mock decided for one query.
struct MockDecision {
  bool correct = false;
  std::size_t newline_count = 0;
  double probability = 0.0;
  std::string answer;
};

// Composition of the demonstrations embedded in a rendered few-shot prompt.
struct PromptComposition {
  std::size_t n_demos = 0;
  double shallow_fraction = 0.0;
  double wrong_fraction = 0.0;
};

// Deterministic stand-in for a completion model. Output is a pure function
// of (seed, prompt, temperature) at temperature 0; above zero a per-prompt
// attempt counter is mixed in so repeated queries can differ.
class MockBackend : public Backend {
 public:
  MockBackend(MockScript script, AnswerKey key);

  CompletionResponse complete(const CompletionRequest& request) override;
  std::string identity() const override;
  std::size_t max_in_flight() const override { return 4; }

  // Queue literal completions; while the queue is nonempty it is served
  // first-in first-out instead of the simulated model.
  void push_scripted(std::string text);

  std::size_t calls() const { return calls_.load(); }
  const MockScript& script() const { return script_; }

  PromptComposition composition(std::string_view prompt) const;
  // The simulated draw for a query prompt. Exposed for replay oracles.
  MockDecision decide(std::string_view prompt, double temperature, std::uint64_t attempt) const;

  static std::string rationale_text(std::size_t newline_count, std::string_view answer);
  static std::string wrong_answer(std::string_view gold, TaskKind task);

 private:
  std::string simulate(std::string_view prompt, double temperature);

  MockScript script_;
  AnswerKey key_;
  std::atomic<std::size_t> calls_{0};
  mutable std::mutex mu_;
  std::deque<std::string> scripted_;
  std::unordered_map<std::uint64_t, std::uint64_t> attempts_;
};

// ---------------------------------------------------------------------------
// OpenAI-compatible completions client

struct HttpConfig {
  std::string base_url;  // e.g. https://api.example.com ; "/v1/completions" is appended
  std::string api_key;
  std::size_t max_attempts = 3;
  std::chrono::milliseconds initial_backoff{1000};
  std::chrono::seconds timeout{60};
  std::size_t in_flight = 4;

  // Reads COTSTREAM_BASE_URL and COTSTREAM_API_KEY; throws Validation if unset.
  static HttpConfig from_env();
};

class HttpBackend : public Backend {
 public:
  explicit HttpBackend(HttpConfig config);

  CompletionResponse complete(const CompletionRequest& request) override;
  std::string identity() const override;
  std::size_t max_in_flight() const override { return config_.in_flight; }

 private:
  HttpConfig config_;
  std::string origin_;       // scheme://host[:port]
  std::string path_prefix_;  // any path component of base_url
  std::counting_semaphore<256> slots_;
};

// Parses an OpenAI completions response body.
CompletionResponse parse_completion_body(std::string_view body, const CompletionRequest& request);

// ---------------------------------------------------------------------------
// Record/replay wrapper

// Append-only JSONL store keyed by cache_key. A temperature-0 request is
// served from its first stored response. Sampled requests are replayed in
// the order they were recorded, so the n-th identical sampled request in a
// session gets the n-th recorded response; past the end it goes to the inner
// backend and is appended.
class CachedBackend : public Backend {
 public:
  CachedBackend(std::shared_ptr<Backend> inner, std::filesystem::path path);

  CompletionResponse complete(const CompletionRequest& request) override;
  std::string identity() const override;
  std::size_t max_in_flight() const override { return inner_->max_in_flight(); }

  std::size_t inner_calls() const { return inner_calls_.load(); }
  std::size_t hits() const { return hits_.load(); }

 private:
  std::shared_ptr<Backend> inner_;
  std::filesystem::path path_;
  std::mutex mu_;
  std::unordered_map<std::string, std::vector<CompletionResponse>> store_;
  std::unordered_map<std::string, std::size_t> cursor_;
  std::ofstream out_;
  std::atomic<std::size_t> inner_calls_{0};
  std::atomic<std::size_t> hits_{0};
};

// ---------------------------------------------------------------------------
// Zero-Shot-CoT

inline constexpr std::string_view kAnswerTrigger = "\nTherefore, the answer is";

struct ZeroShotResult {
  Rationale rationale;
  std::string answer_completion;
  bool empty_rationale = false;
};

// Stage 1 asks "Q: <q>\nA: Let's think step by step." for a rationale; stage 2
// appends the rationale and "\nTherefore, the answer is" to get the answer.
ZeroShotResult zero_shot_cot(const Sample& sample, Backend& backend, double temperature,
                             const DecodingParams& decoding = {});

}  // namespace cotstream
