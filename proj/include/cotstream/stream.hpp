#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cotstream/backend.hpp"
#include "cotstream/dataset.hpp"
#include "cotstream/prompting.hpp"
#include "cotstream/strategies.hpp"

namespace cotstream {

struct BatchMetrics {
  std::size_t batch_index = 1;
  std::size_t n = 0;
  std::size_t n_correct = 0;
  double accuracy = 0.0;
  PromptStats prompt_stats_before;
  StrategyKind strategy_kind = StrategyKind::ZeroShot;

  bool operator==(const BatchMetrics&) const = default;
};

// Per-question log line of the audit trail.
struct QuestionAudit {
  std::string sample_id;
  std::string prompt_hash;
  std::size_t rendered_tokens = 0;
  std::size_t backend_calls = 0;
  std::string predicted;
  bool correct = false;
  bool empty_rationale = false;

  bool operator==(const QuestionAudit&) const = default;
};

// The prompt a batch was answered with, plus what happened to each question.
struct BatchAudit {
  std::size_t batch_index = 1;
  std::string prompt_hash;
  Prompt prompt;
  std::vector<QuestionAudit> questions;

  bool operator==(const BatchAudit&) const = default;
};

struct RunTotals {
  std::size_t n = 0;
  std::size_t n_correct = 0;
  double accuracy = 0.0;

  bool operator==(const RunTotals&) const = default;
};

struct RunReport {
  nlohmann::json config;  // resolved run configuration, null when run programmatically
  std::string config_hash;
  std::string backend_identity;
  std::string template_id{kDefaultTemplate};
  DecodingParams decoding;
  StrategyConfig strategy;
  std::string dataset_name;
  std::size_t batches_requested = 0;
  std::size_t budget_tokens = kDefaultBudgetTokens;
  std::uint64_t seed = 0;
  bool trailing_newline_stripped = true;
  bool update_after_final = false;
  std::size_t prompt_updates = 0;
  std::vector<BatchMetrics> batches;
  RunTotals totals;
  std::optional<double> wall_clock_seconds;
  std::optional<std::size_t> aborted_at_batch;
  std::string abort_reason;
  std::vector<BatchAudit> audit;
  Prompt final_prompt;

  bool operator==(const RunReport&) const = default;
};

struct StreamState {
  std::size_t step = 0;
  Prompt prompt;
  std::vector<BatchMetrics> metrics_history;
  std::uint64_t seed = 0;
};

struct StreamOptions {
  DecodingParams decoding;
  bool update_after_final = false;
  bool record_timing = false;
};

struct BatchEvaluation {
  std::vector<Demonstration> demos;  // completed questions, sample order
  BatchMetrics metrics;
  BatchAudit audit;
  std::optional<std::string> failure;  // set when a backend call failed
};

// Answers every question of the batch under the same prompt. An empty prompt
// takes the two-stage zero-shot route (two calls per question); otherwise one
// few-shot completion per question. Questions may run concurrently up to the
// backend's in-flight limit; results are kept in sample order.
BatchEvaluation evaluate_batch(const Batch& batch, const Prompt& prompt, Backend& backend,
                               TaskKind task, StrategyKind strategy = StrategyKind::ZeroShot,
                               const DecodingParams& decoding = {});

// Rationale part of a few-shot completion: everything before the last
// "The answer is".
Rationale few_shot_rationale(std::string_view completion);

RunReport run_stream(const Dataset& dataset, std::size_t m, const StrategyConfig& cfg,
                     Backend& backend, std::size_t budget_tokens, std::uint64_t seed,
                     const StreamOptions& options = {});

enum class ReportFormat { Csv, Json };
ReportFormat report_format_from_string(std::string_view name);

inline constexpr std::string_view kReportCsvHeader =
    "batch,n,n_correct,accuracy,prompt_demos,prompt_wrong_fraction,prompt_mean_depth,"
    "prompt_tokens,strategy";

std::string report_csv(const RunReport& report);
std::string report_json(const RunReport& report);
RunReport parse_report_json(std::string_view text);
void write_report(const RunReport& report, const std::filesystem::path& path, ReportFormat format);
// One JSON object per batch boundary.
void write_audit_jsonl(const RunReport& report, const std::filesystem::path& path);

}  // namespace cotstream
