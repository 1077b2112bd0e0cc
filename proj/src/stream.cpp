#include "cotstream/stream.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "cotstream/error.hpp"
#include "cotstream/json_io.hpp"
#include "text_util.hpp"

namespace cotstream {

using nlohmann::json;

// --- JSON for the report types ---------------------------------------------

void to_json(json& j, const BatchMetrics& v) {
  j = json{{"batch_index", v.batch_index},
           {"n", v.n},
           {"n_correct", v.n_correct},
           {"accuracy", v.accuracy},
           {"prompt_stats_before", v.prompt_stats_before},
           {"strategy", to_string(v.strategy_kind)}};
}

void from_json(const json& j, BatchMetrics& v) {
  j.at("batch_index").get_to(v.batch_index);
  j.at("n").get_to(v.n);
  j.at("n_correct").get_to(v.n_correct);
  j.at("accuracy").get_to(v.accuracy);
  j.at("prompt_stats_before").get_to(v.prompt_stats_before);
  v.strategy_kind = strategy_from_string(j.at("strategy").get<std::string>());
}

void to_json(json& j, const QuestionAudit& v) {
  j = json{{"sample_id", v.sample_id},         {"prompt_hash", v.prompt_hash},
           {"rendered_tokens", v.rendered_tokens}, {"backend_calls", v.backend_calls},
           {"predicted", v.predicted},         {"correct", v.correct},
           {"empty_rationale", v.empty_rationale}};
}

void from_json(const json& j, QuestionAudit& v) {
  j.at("sample_id").get_to(v.sample_id);
  j.at("prompt_hash").get_to(v.prompt_hash);
  j.at("rendered_tokens").get_to(v.rendered_tokens);
  j.at("backend_calls").get_to(v.backend_calls);
  j.at("predicted").get_to(v.predicted);
  j.at("correct").get_to(v.correct);
  j.at("empty_rationale").get_to(v.empty_rationale);
}

void to_json(json& j, const BatchAudit& v) {
  j = json{{"batch_index", v.batch_index},
           {"prompt_hash", v.prompt_hash},
           {"prompt", v.prompt},
           {"questions", v.questions}};
}

void from_json(const json& j, BatchAudit& v) {
  j.at("batch_index").get_to(v.batch_index);
  j.at("prompt_hash").get_to(v.prompt_hash);
  j.at("prompt").get_to(v.prompt);
  j.at("questions").get_to(v.questions);
}

void to_json(json& j, const RunTotals& v) {
  j = json{{"n", v.n}, {"n_correct", v.n_correct}, {"accuracy", v.accuracy}};
}

void from_json(const json& j, RunTotals& v) {
  j.at("n").get_to(v.n);
  j.at("n_correct").get_to(v.n_correct);
  j.at("accuracy").get_to(v.accuracy);
}

void to_json(json& j, const RunReport& v) {
  j = json{{"config", v.config},
           {"config_hash", v.config_hash},
           {"backend", v.backend_identity},
           {"template", v.template_id},
           {"decoding", v.decoding},
           {"strategy", v.strategy},
           {"dataset", v.dataset_name},
           {"batches_requested", v.batches_requested},
           {"budget_tokens", v.budget_tokens},
           {"seed", v.seed},
           {"trailing_newline_stripped", v.trailing_newline_stripped},
           {"update_after_final", v.update_after_final},
           {"prompt_updates", v.prompt_updates},
           {"batches", v.batches},
           {"totals", v.totals},
           {"wall_clock_seconds", v.wall_clock_seconds ? json(*v.wall_clock_seconds) : json()},
           {"aborted_at_batch", v.aborted_at_batch ? json(*v.aborted_at_batch) : json()},
           {"abort_reason", v.abort_reason},
           {"audit", v.audit},
           {"final_prompt", v.final_prompt}};
}

void from_json(const json& j, RunReport& v) {
  v.config = j.at("config");
  j.at("config_hash").get_to(v.config_hash);
  j.at("backend").get_to(v.backend_identity);
  j.at("template").get_to(v.template_id);
  j.at("decoding").get_to(v.decoding);
  j.at("strategy").get_to(v.strategy);
  j.at("dataset").get_to(v.dataset_name);
  j.at("batches_requested").get_to(v.batches_requested);
  j.at("budget_tokens").get_to(v.budget_tokens);
  j.at("seed").get_to(v.seed);
  j.at("trailing_newline_stripped").get_to(v.trailing_newline_stripped);
  j.at("update_after_final").get_to(v.update_after_final);
  j.at("prompt_updates").get_to(v.prompt_updates);
  j.at("batches").get_to(v.batches);
  j.at("totals").get_to(v.totals);
  const auto& wall = j.at("wall_clock_seconds");
  v.wall_clock_seconds = wall.is_null() ? std::nullopt : std::optional<double>(wall.get<double>());
  const auto& aborted = j.at("aborted_at_batch");
  v.aborted_at_batch =
      aborted.is_null() ? std::nullopt : std::optional<std::size_t>(aborted.get<std::size_t>());
  j.at("abort_reason").get_to(v.abort_reason);
  j.at("audit").get_to(v.audit);
  j.at("final_prompt").get_to(v.final_prompt);
}

// --- evaluation --------------------------------------------------------------

Rationale few_shot_rationale(std::string_view completion) {
  auto anchor = detail::rfind_icase(completion, "the answer is");
  if (anchor != std::string_view::npos) completion = completion.substr(0, anchor);
  return make_rationale(detail::trim_spaces(completion), Origin{OriginKind::FewShotGreedy, 0.0});
}

namespace {

struct QuestionOutcome {
  Demonstration demo;
  QuestionAudit audit;
};

QuestionOutcome answer_question(const Sample& sample, const Prompt& prompt,
                                const std::string& hash, std::size_t batch_index,
                                Backend& backend, TaskKind task, const DecodingParams& decoding) {
  QuestionOutcome out;
  out.audit.sample_id = sample.id;
  out.audit.prompt_hash = hash;
  const auto rendered = render_prompt(prompt, sample.question);
  out.audit.rendered_tokens = estimate_tokens(rendered);

  Rationale rationale;
  std::string predicted;
  if (prompt.demos.empty()) {
    auto zs = zero_shot_cot(sample, backend, 0.0, decoding);
    out.audit.backend_calls = 2;
    out.audit.empty_rationale = zs.empty_rationale;
    rationale = std::move(zs.rationale);
    predicted = extract_answer(zs.answer_completion, task);
  } else {
    CompletionRequest req{rendered, decoding.max_tokens, 0.0, decoding.stop, decoding.model_id};
    auto response = backend.complete(req);
    out.audit.backend_calls = 1;
    rationale = few_shot_rationale(response.text);
    out.audit.empty_rationale = rationale.text.empty();
    predicted = extract_answer(response.text, task);
  }
  auto verdict = grade(predicted, sample.gold, task);
  out.audit.predicted = predicted;
  out.audit.correct = verdict.correct;
  out.demo = Demonstration{sample.id, sample.question, std::move(rationale), predicted,
                           std::move(verdict), batch_index};
  return out;
}

}  // namespace

BatchEvaluation evaluate_batch(const Batch& batch, const Prompt& prompt, Backend& backend,
                               TaskKind task, StrategyKind strategy,
                               const DecodingParams& decoding) {
  const auto n = batch.samples.size();
  const auto hash = prompt_hash(prompt);
  std::vector<std::optional<QuestionOutcome>> outcomes(n);

  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::mutex failure_mu;
  std::optional<std::pair<std::size_t, std::string>> failure;

  auto worker = [&] {
    while (!failed.load()) {
      auto i = next.fetch_add(1);
      if (i >= n) return;
      try {
        outcomes[i] = answer_question(batch.samples[i], prompt, hash, batch.index, backend, task,
                                      decoding);
      } catch (const std::exception& e) {
        std::lock_guard lock(failure_mu);
        if (!failure || i < failure->first) failure.emplace(i, e.what());
        failed.store(true);
      }
    }
  };
  const auto threads = std::clamp<std::size_t>(backend.max_in_flight(), 1, std::max<std::size_t>(n, 1));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  BatchEvaluation ev;
  ev.audit.batch_index = batch.index;
  ev.audit.prompt_hash = hash;
  ev.audit.prompt = prompt;
  ev.metrics.batch_index = batch.index;
  ev.metrics.prompt_stats_before = prompt_stats(prompt);
  ev.metrics.strategy_kind = strategy;
  for (auto& o : outcomes) {
    if (!o) continue;
    if (o->demo.verdict.correct) ++ev.metrics.n_correct;
    ++ev.metrics.n;
    ev.audit.questions.push_back(std::move(o->audit));
    ev.demos.push_back(std::move(o->demo));
  }
  if (ev.metrics.n > 0)
    ev.metrics.accuracy = static_cast<double>(ev.metrics.n_correct) / static_cast<double>(ev.metrics.n);
  if (failure) {
    ev.failure = "batch " + std::to_string(batch.index) + ", sample " +
                 batch.samples[failure->first].id + ": " + failure->second;
  }
  return ev;
}

// --- run loop ----------------------------------------------------------------

RunReport run_stream(const Dataset& dataset, std::size_t m, const StrategyConfig& cfg,
                     Backend& backend, std::size_t budget_tokens, std::uint64_t seed,
                     const StreamOptions& options) {
  cfg.validate();
  if (budget_tokens == 0) throw Error(ErrorKind::Validation, "token budget must be positive");
  const auto batches = partition(dataset, m);
  const auto started = std::chrono::steady_clock::now();

  RunReport report;
  report.backend_identity = backend.identity();
  report.decoding = options.decoding;
  report.strategy = cfg;
  report.dataset_name = dataset.name;
  report.batches_requested = m;
  report.budget_tokens = budget_tokens;
  report.seed = seed;
  report.update_after_final = options.update_after_final;

  StreamState state;
  state.seed = seed;
  state.prompt.budget_tokens = budget_tokens;
  report.template_id = state.prompt.template_id;

  for (const auto& batch : batches) {
    std::vector<std::string> questions;
    questions.reserve(batch.samples.size());
    for (const auto& s : batch.samples) questions.push_back(s.question);

    BatchEvaluation ev;
    try {
      // One prompt value for the whole batch, sized for its longest question.
      state.prompt = enforce_budget_all(std::move(state.prompt), questions);
      ev = evaluate_batch(batch, state.prompt, backend, dataset.task, cfg.kind, options.decoding);
    } catch (const Error& e) {
      ev.failure = e.what();
    }
    if (ev.failure) {
      report.aborted_at_batch = batch.index;
      report.abort_reason = *ev.failure;
      if (!ev.audit.questions.empty()) report.audit.push_back(std::move(ev.audit));
      break;
    }

    state.metrics_history.push_back(ev.metrics);
    state.step = state.metrics_history.size();
    report.audit.push_back(std::move(ev.audit));

    const bool last = batch.index == batches.size();
    if (last && !options.update_after_final) continue;
    BatchResult result{batch.index, batch.samples, std::move(ev.demos)};
    try {
      state.prompt = apply_strategy(std::move(state.prompt), result, cfg, backend, options.decoding);
      ++report.prompt_updates;
    } catch (const Error& e) {
      report.aborted_at_batch = batch.index;
      report.abort_reason = std::string("strategy update failed: ") + e.what();
      break;
    }
  }

  report.batches = state.metrics_history;
  for (const auto& b : report.batches) {
    report.totals.n += b.n;
    report.totals.n_correct += b.n_correct;
  }
  if (report.totals.n > 0) {
    report.totals.accuracy =
        static_cast<double>(report.totals.n_correct) / static_cast<double>(report.totals.n);
  }
  report.final_prompt = state.prompt;
  if (options.record_timing) {
    report.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  }
  return report;
}

// --- output ------------------------------------------------------------------

ReportFormat report_format_from_string(std::string_view name) {
  auto n = detail::to_lower(name);
  if (n == "csv") return ReportFormat::Csv;
  if (n == "json") return ReportFormat::Json;
  throw Error(ErrorKind::Validation, "unknown report format '" + std::string(name) + "' (csv or json)");
}

namespace {

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << content;
  out.flush();
  if (!out) throw Error(ErrorKind::Io, "failed writing " + path.string());
}

}  // namespace

std::string report_csv(const RunReport& report) {
  std::ostringstream os;
  os << kReportCsvHeader << '\n';
  for (const auto& b : report.batches) {
    const auto& p = b.prompt_stats_before;
    os << b.batch_index << ',' << b.n << ',' << b.n_correct << ',' << fixed4(b.accuracy) << ','
       << p.n_demos << ',' << fixed4(p.wrong_fraction) << ',' << fixed4(p.mean_newline_depth)
       << ',' << p.token_total << ',' << to_string(b.strategy_kind) << '\n';
  }
  return os.str();
}

std::string report_json(const RunReport& report) { return json(report).dump(2) + "\n"; }

RunReport parse_report_json(std::string_view text) {
  try {
    return json::parse(text).get<RunReport>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("malformed report JSON: ") + e.what());
  }
}

void write_report(const RunReport& report, const std::filesystem::path& path, ReportFormat format) {
  write_file(path, format == ReportFormat::Csv ? report_csv(report) : report_json(report));
}

void write_audit_jsonl(const RunReport& report, const std::filesystem::path& path) {
  std::string content;
  for (const auto& a : report.audit) content += json(a).dump() + "\n";
  write_file(path, content);
}

}  // namespace cotstream
