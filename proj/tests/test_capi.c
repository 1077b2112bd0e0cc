#include <stdio.h>
#include <stdlib.h>
#include <string.h>
#include <unistd.h>

#include "cotstream/cotstream.h"

static int failures = 0;

#define EXPECT(cond)                                                  \
  do {                                                                \
    if (!(cond)) {                                                    \
      fprintf(stderr, "%s:%d: expected %s\n", __FILE__, __LINE__, #cond); \
      ++failures;                                                     \
    }                                                                 \
  } while (0)

static void write_dataset(const char* path, int n) {
  FILE* f = fopen(path, "w");
  for (int i = 0; i < n; ++i) fprintf(f, "{\"question\":\"What is %d plus %d?\",\"answer\":\"%d\"}\n", i, i + 1, 2 * i + 1);
  fclose(f);
}

int main(void) {
  char dir[] = "/tmp/cotstream-capi-XXXXXX";
  if (!mkdtemp(dir)) return 1;
  char data[256], cache[256], out[256];
  snprintf(data, sizeof data, "%s/data.jsonl", dir);
  snprintf(cache, sizeof cache, "%s/cache.jsonl", dir);
  snprintf(out, sizeof out, "%s/report.csv", dir);
  write_dataset(data, 100);

  EXPECT(strcmp(cotstream_version(), COTSTREAM_VERSION) == 0);

  cotstream_dataset* ds = NULL;
  EXPECT(cotstream_dataset_load("/nonexistent/file.jsonl", "arithmetic", 0, &ds) == COTSTREAM_ERR_IO);
  EXPECT(strlen(cotstream_last_error()) > 0);
  EXPECT(cotstream_dataset_load(data, "poetry", 0, &ds) == COTSTREAM_ERR_VALIDATION);
  EXPECT(cotstream_dataset_load(data, "arithmetic", 0, &ds) == COTSTREAM_OK);
  EXPECT(cotstream_dataset_size(ds) == 100);

  size_t sizes[10];
  EXPECT(cotstream_dataset_partition(ds, 10, sizes) == COTSTREAM_OK);
  for (int i = 0; i < 10; ++i) EXPECT(sizes[i] == 10);
  EXPECT(cotstream_dataset_partition(ds, 0, sizes) == COTSTREAM_ERR_VALIDATION);

  cotstream_mock_params mp;
  cotstream_mock_defaults(&mp);
  EXPECT(mp.correct_base == 0.6 && mp.xi == 3);
  cotstream_backend* mock = NULL;
  EXPECT(cotstream_backend_mock(ds, &mp, &mock) == COTSTREAM_OK);

  cotstream_backend* cached = NULL;
  EXPECT(cotstream_backend_cached(mock, cache, &cached) == COTSTREAM_OK);

  cotstream_strategy st;
  cotstream_strategy_defaults(&st);
  EXPECT(st.xi == 3 && st.demo_cap == 8);
  st.kind = "zero-shot";
  cotstream_report* report = NULL;
  EXPECT(cotstream_run_stream(ds, 10, &st, cached, 2048, 0, &report) == COTSTREAM_OK);
  EXPECT(cotstream_report_batch_count(report) == 10);
  EXPECT(cotstream_report_aborted_at(report) == 0);
  EXPECT(cotstream_backend_calls(mock) == 200);
  EXPECT(cotstream_backend_calls(cached) == 200);
  cotstream_batch_metrics bm;
  EXPECT(cotstream_report_batch(report, 0, &bm) == COTSTREAM_OK);
  EXPECT(bm.batch_index == 1 && bm.n == 10 && bm.prompt_demos == 0);
  EXPECT(cotstream_report_batch(report, 10, &bm) == COTSTREAM_ERR_VALIDATION);
  EXPECT(cotstream_report_write(report, out, "csv") == COTSTREAM_OK);
  EXPECT(cotstream_report_write(report, out, "xml") == COTSTREAM_ERR_VALIDATION);
  cotstream_report_free(report);

  /* Replay: a fresh cache over the same file makes no new inner calls. */
  cotstream_backend* replay = NULL;
  EXPECT(cotstream_backend_cached(mock, cache, &replay) == COTSTREAM_OK);
  EXPECT(cotstream_run_stream(ds, 10, &st, replay, 2048, 0, &report) == COTSTREAM_OK);
  EXPECT(cotstream_backend_calls(replay) == 0);
  cotstream_report_free(report);

  st.kind = "sideways";
  EXPECT(cotstream_run_stream(ds, 10, &st, mock, 2048, 0, &report) == COTSTREAM_ERR_VALIDATION);

  cotstream_backend_free(replay);
  cotstream_backend_free(cached);
  cotstream_backend_free(mock);
  cotstream_dataset_free(ds);

  EXPECT(cotstream_count_newlines("a\nb\nc") == 2);
  EXPECT(cotstream_classify_depth(3, 3) == 1);
  EXPECT(cotstream_classify_depth(2, 3) == 0);
  EXPECT(cotstream_estimate_tokens("abcde") == 2);

  char buf[8];
  size_t needed = 0;
  EXPECT(cotstream_extract_answer("So the answer is $1,234.50.", "arithmetic", buf, sizeof buf, &needed) == COTSTREAM_OK);
  EXPECT(strcmp(buf, "1234.5") == 0 && needed == 6);
  char small[3];
  EXPECT(cotstream_extract_answer("The answer is 123456.", "arithmetic", small, sizeof small, &needed) == COTSTREAM_OK);
  EXPECT(needed == 6 && strcmp(small, "12") == 0);
  int correct = 0;
  EXPECT(cotstream_grade("4.0", "4", "arithmetic", &correct) == COTSTREAM_OK && correct == 1);
  EXPECT(cotstream_grade("no", "yes", "yesno", &correct) == COTSTREAM_OK && correct == 0);

  const char* argv[] = {"cotstream", "run"};
  EXPECT(cotstream_cli_execute(2, argv) == 1);

  unlink(data);
  unlink(cache);
  unlink(out);
  rmdir(dir);
  if (failures) fprintf(stderr, "%d failure(s)\n", failures);
  else printf("c api: all checks passed\n");
  return failures ? 1 : 0;
}
