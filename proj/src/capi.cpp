#include "cotstream/cotstream.h"

#include <cstring>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "cotstream/cli.hpp"
#include "cotstream/dataset.hpp"
#include "cotstream/error.hpp"
#include "cotstream/stream.hpp"

struct cotstream_dataset {
  cotstream::Dataset value;
};

struct cotstream_backend {
  std::shared_ptr<cotstream::Backend> value;
};

struct cotstream_report {
  cotstream::RunReport value;
};

namespace {

thread_local std::string g_last_error;

cotstream_status status_for(cotstream::ErrorKind kind) {
  using cotstream::ErrorKind;
  switch (kind) {
    case ErrorKind::Validation: return COTSTREAM_ERR_VALIDATION;
    case ErrorKind::Io: return COTSTREAM_ERR_IO;
    case ErrorKind::Parse: return COTSTREAM_ERR_PARSE;
    case ErrorKind::Budget: return COTSTREAM_ERR_BUDGET;
    case ErrorKind::Backend: return COTSTREAM_ERR_BACKEND;
  }
  return COTSTREAM_ERR_INTERNAL;
}

// Runs fn, translating exceptions into status codes.
template <class Fn>
cotstream_status guarded(Fn&& fn) {
  try {
    fn();
    return COTSTREAM_OK;
  } catch (const cotstream::Error& e) {
    g_last_error = e.what();
    return status_for(e.kind());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return COTSTREAM_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return COTSTREAM_ERR_INTERNAL;
  }
}

cotstream_status null_arg(const char* name) {
  g_last_error = std::string("null argument: ") + name;
  return COTSTREAM_ERR_VALIDATION;
}

}  // namespace

extern "C" {

const char* cotstream_version(void) { return COTSTREAM_VERSION; }

const char* cotstream_last_error(void) { return g_last_error.c_str(); }

void cotstream_strategy_defaults(cotstream_strategy* out) {
  if (out == nullptr) return;
  cotstream::StrategyConfig d;
  out->kind = "concat";
  out->xi = d.xi;
  out->demo_cap = d.demo_cap;
  out->wrong_attempts = d.wrong_attempts;
  out->wrong_temperature = d.wrong_temperature;
}

void cotstream_mock_defaults(cotstream_mock_params* out) {
  if (out == nullptr) return;
  cotstream::MockScript d;
  out->seed = d.seed;
  out->correct_base = d.correct_base;
  out->shallow_bonus = d.shallow_bonus;
  out->wrong_penalty = d.wrong_penalty;
  out->xi = d.shallow_xi;
}

cotstream_status cotstream_dataset_load(const char* path, const char* task, size_t limit,
                                        cotstream_dataset** out) {
  if (path == nullptr) return null_arg("path");
  if (task == nullptr) return null_arg("task");
  if (out == nullptr) return null_arg("out");
  return guarded([&] {
    auto kind = cotstream::task_from_string(task);
    auto ds = cotstream::load_dataset(path, kind, limit == 0 ? std::nullopt : std::optional<std::size_t>(limit));
    *out = new cotstream_dataset{std::move(ds)};
  });
}

size_t cotstream_dataset_size(const cotstream_dataset* dataset) {
  return dataset == nullptr ? 0 : dataset->value.samples.size();
}

cotstream_status cotstream_dataset_partition(const cotstream_dataset* dataset, size_t m, size_t* sizes) {
  if (dataset == nullptr) return null_arg("dataset");
  if (sizes == nullptr) return null_arg("sizes");
  return guarded([&] {
    auto batches = cotstream::partition(dataset->value, m);
    for (std::size_t i = 0; i < batches.size(); ++i) sizes[i] = batches[i].samples.size();
  });
}

void cotstream_dataset_free(cotstream_dataset* dataset) { delete dataset; }

cotstream_status cotstream_backend_mock(const cotstream_dataset* answer_key,
                                        const cotstream_mock_params* params, cotstream_backend** out) {
  if (answer_key == nullptr) return null_arg("answer_key");
  if (out == nullptr) return null_arg("out");
  return guarded([&] {
    cotstream::MockScript script;
    if (params != nullptr) {
      script.seed = params->seed;
      script.correct_base = params->correct_base;
      script.shallow_bonus = params->shallow_bonus;
      script.wrong_penalty = params->wrong_penalty;
      script.shallow_xi = params->xi;
    }
    auto mock = std::make_shared<cotstream::MockBackend>(script, cotstream::AnswerKey(answer_key->value));
    *out = new cotstream_backend{std::move(mock)};
  });
}

cotstream_status cotstream_backend_http_from_env(cotstream_backend** out) {
  if (out == nullptr) return null_arg("out");
  return guarded([&] {
    auto http = std::make_shared<cotstream::HttpBackend>(cotstream::HttpConfig::from_env());
    *out = new cotstream_backend{std::move(http)};
  });
}

cotstream_status cotstream_backend_cached(cotstream_backend* inner, const char* path, cotstream_backend** out) {
  if (inner == nullptr) return null_arg("inner");
  if (path == nullptr) return null_arg("path");
  if (out == nullptr) return null_arg("out");
  return guarded([&] {
    auto cached = std::make_shared<cotstream::CachedBackend>(inner->value, path);
    *out = new cotstream_backend{std::move(cached)};
  });
}

size_t cotstream_backend_calls(const cotstream_backend* backend) {
  if (backend == nullptr) return 0;
  if (auto* mock = dynamic_cast<const cotstream::MockBackend*>(backend->value.get())) return mock->calls();
  if (auto* cached = dynamic_cast<const cotstream::CachedBackend*>(backend->value.get()))
    return cached->inner_calls();
  return 0;
}

void cotstream_backend_free(cotstream_backend* backend) { delete backend; }

cotstream_status cotstream_run_stream(const cotstream_dataset* dataset, size_t m,
                                      const cotstream_strategy* strategy, cotstream_backend* backend,
                                      size_t budget_tokens, uint64_t seed, cotstream_report** out) {
  if (dataset == nullptr) return null_arg("dataset");
  if (strategy == nullptr) return null_arg("strategy");
  if (backend == nullptr) return null_arg("backend");
  if (out == nullptr) return null_arg("out");
  return guarded([&] {
    cotstream::StrategyConfig cfg;
    cfg.kind = cotstream::strategy_from_string(strategy->kind == nullptr ? "" : strategy->kind);
    cfg.xi = strategy->xi;
    cfg.demo_cap = strategy->demo_cap;
    cfg.wrong_attempts = strategy->wrong_attempts;
    cfg.wrong_temperature = strategy->wrong_temperature;
    auto report = cotstream::run_stream(dataset->value, m, cfg, *backend->value, budget_tokens, seed);
    *out = new cotstream_report{std::move(report)};
  });
}

size_t cotstream_report_batch_count(const cotstream_report* report) {
  return report == nullptr ? 0 : report->value.batches.size();
}

cotstream_status cotstream_report_batch(const cotstream_report* report, size_t i, cotstream_batch_metrics* out) {
  if (report == nullptr) return null_arg("report");
  if (out == nullptr) return null_arg("out");
  if (i >= report->value.batches.size()) {
    g_last_error = "batch index " + std::to_string(i) + " out of range";
    return COTSTREAM_ERR_VALIDATION;
  }
  const auto& b = report->value.batches[i];
  out->batch_index = b.batch_index;
  out->n = b.n;
  out->n_correct = b.n_correct;
  out->accuracy = b.accuracy;
  out->prompt_demos = b.prompt_stats_before.n_demos;
  out->prompt_wrong_fraction = b.prompt_stats_before.wrong_fraction;
  out->prompt_mean_depth = b.prompt_stats_before.mean_newline_depth;
  out->prompt_tokens = b.prompt_stats_before.token_total;
  return COTSTREAM_OK;
}

size_t cotstream_report_aborted_at(const cotstream_report* report) {
  if (report == nullptr || !report->value.aborted_at_batch) return 0;
  return *report->value.aborted_at_batch;
}

cotstream_status cotstream_report_write(const cotstream_report* report, const char* path, const char* format) {
  if (report == nullptr) return null_arg("report");
  if (path == nullptr) return null_arg("path");
  if (format == nullptr) return null_arg("format");
  return guarded([&] {
    cotstream::write_report(report->value, path, cotstream::report_format_from_string(format));
  });
}

void cotstream_report_free(cotstream_report* report) { delete report; }

size_t cotstream_count_newlines(const char* text) {
  return text == nullptr ? 0 : cotstream::count_newlines(text);
}

int cotstream_classify_depth(size_t newline_count, size_t xi) {
  return cotstream::classify_depth(newline_count, xi) == cotstream::DepthClass::Deep ? 1 : 0;
}

size_t cotstream_estimate_tokens(const char* text) {
  return cotstream::estimate_tokens(text == nullptr ? "" : text);
}

cotstream_status cotstream_extract_answer(const char* completion, const char* task, char* buf,
                                          size_t buf_len, size_t* needed) {
  if (completion == nullptr) return null_arg("completion");
  if (task == nullptr) return null_arg("task");
  return guarded([&] {
    auto answer = cotstream::extract_answer(completion, cotstream::task_from_string(task));
    if (needed != nullptr) *needed = answer.size();
    if (buf != nullptr && buf_len > 0) {
      auto n = std::min(answer.size(), buf_len - 1);
      std::memcpy(buf, answer.data(), n);
      buf[n] = '\0';
    }
  });
}

cotstream_status cotstream_grade(const char* predicted, const char* gold, const char* task, int* correct) {
  if (predicted == nullptr) return null_arg("predicted");
  if (gold == nullptr) return null_arg("gold");
  if (task == nullptr) return null_arg("task");
  if (correct == nullptr) return null_arg("correct");
  return guarded([&] {
    *correct = cotstream::grade(predicted, gold, cotstream::task_from_string(task)).correct ? 1 : 0;
  });
}

int cotstream_cli_execute(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 0; i < argc; ++i) args.emplace_back(argv[i] == nullptr ? "" : argv[i]);
  try {
    return cotstream::cli::execute(args, std::cout, std::cerr);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cotstream::cli::kRuntime;
  }
}

}  // extern "C"
