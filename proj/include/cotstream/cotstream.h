/* C interface to the cotstream harness.
 *
 * Objects are opaque handles created by *_load / *_create / run functions and
 * released with the matching *_free. Every fallible call returns a
 * cotstream_status; on failure cotstream_last_error() describes the problem
 * (thread-local, valid until the next failing call on the same thread).
 */
#ifndef COTSTREAM_H
#define COTSTREAM_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  define COTSTREAM_API __declspec(dllexport)
#else
#  define COTSTREAM_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

#define COTSTREAM_VERSION "1.0.0"

typedef enum cotstream_status {
  COTSTREAM_OK = 0,
  COTSTREAM_ERR_VALIDATION = 1,
  COTSTREAM_ERR_IO = 2,
  COTSTREAM_ERR_PARSE = 3,
  COTSTREAM_ERR_BUDGET = 4,
  COTSTREAM_ERR_BACKEND = 5,
  COTSTREAM_ERR_INTERNAL = 6
} cotstream_status;

typedef struct cotstream_dataset cotstream_dataset;
typedef struct cotstream_backend cotstream_backend;
typedef struct cotstream_report cotstream_report;

typedef struct cotstream_strategy {
  const char* kind; /* zero-shot, concat, correct, wrong, shallow, deep */
  size_t xi;
  size_t demo_cap;
  size_t wrong_attempts;
  double wrong_temperature;
} cotstream_strategy;

typedef struct cotstream_mock_params {
  uint64_t seed;
  double correct_base;
  double shallow_bonus;
  double wrong_penalty;
  size_t xi;
} cotstream_mock_params;

typedef struct cotstream_batch_metrics {
  size_t batch_index;
  size_t n;
  size_t n_correct;
  double accuracy;
  size_t prompt_demos;
  double prompt_wrong_fraction;
  double prompt_mean_depth;
  size_t prompt_tokens;
} cotstream_batch_metrics;

COTSTREAM_API const char* cotstream_version(void);
COTSTREAM_API const char* cotstream_last_error(void);

/* Fills defaults (concat, xi 3, cap 8, 8 attempts, temperature 0.7). */
COTSTREAM_API void cotstream_strategy_defaults(cotstream_strategy* out);
/* Fills defaults (seed 0, base 0.6, bonus 0.2, penalty 0.1, xi 3). */
COTSTREAM_API void cotstream_mock_defaults(cotstream_mock_params* out);

/* Datasets. limit 0 means "all records". */
COTSTREAM_API cotstream_status cotstream_dataset_load(const char* path, const char* task,
                                                      size_t limit, cotstream_dataset** out);
COTSTREAM_API size_t cotstream_dataset_size(const cotstream_dataset* dataset);
/* Writes m batch sizes into sizes (which must hold m entries). */
COTSTREAM_API cotstream_status cotstream_dataset_partition(const cotstream_dataset* dataset,
                                                           size_t m, size_t* sizes);
COTSTREAM_API void cotstream_dataset_free(cotstream_dataset* dataset);

/* Backends. The mock answers from the dataset's gold answers. A cached
 * backend keeps its own reference to inner; free both handles independently. */
COTSTREAM_API cotstream_status cotstream_backend_mock(const cotstream_dataset* answer_key,
                                                      const cotstream_mock_params* params,
                                                      cotstream_backend** out);
COTSTREAM_API cotstream_status cotstream_backend_http_from_env(cotstream_backend** out);
COTSTREAM_API cotstream_status cotstream_backend_cached(cotstream_backend* inner, const char* path,
                                                        cotstream_backend** out);
/* Calls that reached the model: mock calls, or inner calls for a cache. 0 for http. */
COTSTREAM_API size_t cotstream_backend_calls(const cotstream_backend* backend);
COTSTREAM_API void cotstream_backend_free(cotstream_backend* backend);

/* Runs the stream. An aborted run still yields a report (see aborted_at). */
COTSTREAM_API cotstream_status cotstream_run_stream(const cotstream_dataset* dataset, size_t m,
                                                    const cotstream_strategy* strategy,
                                                    cotstream_backend* backend, size_t budget_tokens,
                                                    uint64_t seed, cotstream_report** out);
COTSTREAM_API size_t cotstream_report_batch_count(const cotstream_report* report);
COTSTREAM_API cotstream_status cotstream_report_batch(const cotstream_report* report, size_t i,
                                                      cotstream_batch_metrics* out);
/* 0 when the run completed, otherwise the 1-based batch that failed. */
COTSTREAM_API size_t cotstream_report_aborted_at(const cotstream_report* report);
/* format: "csv" or "json". */
COTSTREAM_API cotstream_status cotstream_report_write(const cotstream_report* report,
                                                      const char* path, const char* format);
COTSTREAM_API void cotstream_report_free(cotstream_report* report);

/* Text helpers. */
COTSTREAM_API size_t cotstream_count_newlines(const char* text);
/* 1 for deep (newline_count >= xi), 0 for shallow. */
COTSTREAM_API int cotstream_classify_depth(size_t newline_count, size_t xi);
COTSTREAM_API size_t cotstream_estimate_tokens(const char* text);
/* Copies the canonical answer into buf (NUL-terminated, truncated to
 * buf_len - 1). *needed receives the full length excluding the NUL. */
COTSTREAM_API cotstream_status cotstream_extract_answer(const char* completion, const char* task,
                                                        char* buf, size_t buf_len, size_t* needed);
COTSTREAM_API cotstream_status cotstream_grade(const char* predicted, const char* gold,
                                               const char* task, int* correct);

/* The command-line driver. Returns the process exit code (0, 1 or 2). */
COTSTREAM_API int cotstream_cli_execute(int argc, const char* const* argv);

#ifdef __cplusplus
}
#endif

#endif /* COTSTREAM_H */
