#include <doctest.h>

#include <set>
#include <sstream>

#include "cotstream/error.hpp"
#include "cotstream/stream.hpp"
#include "support.hpp"

using namespace cotstream;

namespace {

Batch whole(const Dataset& ds, std::size_t index = 1) { return Batch{index, ds.samples}; }

Demonstration demo_for(const Sample& s, bool correct) {
  Demonstration d;
  d.sample_id = s.id;
  d.question = s.question;
  d.rationale = make_rationale(MockBackend::rationale_text(1, s.gold), Origin{OriginKind::ZeroShotGreedy, 0.0});
  d.answer_text = correct ? s.gold : MockBackend::wrong_answer(s.gold, s.task);
  d.verdict = Verdict{correct, d.answer_text};
  return d;
}

}  // namespace

TEST_CASE("evaluate_batch forced outcome") {
  auto ds = testing::small_dataset(1);
  MockScript script;
  script.correct_base = 1.0;
  MockBackend mock(script, AnswerKey(ds));
  auto ev = evaluate_batch(whole(ds), Prompt{}, mock, ds.task);
  CHECK(ev.metrics.n == 1);
  CHECK(ev.metrics.accuracy == 1.0);
  CHECK_FALSE(ev.failure.has_value());
}

TEST_CASE("evaluate_batch replay oracle") {
  auto ds = testing::small_dataset(60, TaskKind::Arithmetic, 3);
  MockScript script;
  script.seed = 11;
  script.shallow_bonus = 0.0;
  script.wrong_penalty = 0.0;
  MockBackend mock(script, AnswerKey(ds));

  SUBCASE("zero-shot") {
    auto ev = evaluate_batch(whole(ds), Prompt{}, mock, ds.task);
    std::size_t expected = 0;
    for (const auto& s : ds.samples) {
      Prompt empty;
      expected += mock.decide(render_prompt(empty, s.question), 0.0, 0).correct ? 1 : 0;
    }
    CHECK(ev.metrics.n_correct == expected);
    CHECK(mock.calls() == 120);
    CHECK(ev.metrics.n_correct > 15);
    CHECK(ev.metrics.n_correct < 55);
  }

  SUBCASE("few-shot") {
    Prompt p;
    p.demos = {demo_for(ds.samples[0], true), demo_for(ds.samples[1], false)};
    auto ev = evaluate_batch(whole(ds), p, mock, ds.task);
    std::size_t expected = 0;
    for (const auto& s : ds.samples) expected += mock.decide(render_prompt(p, s.question), 0.0, 0).correct ? 1 : 0;
    CHECK(ev.metrics.n_correct == expected);
    CHECK(mock.calls() == 60);
    for (const auto& q : ev.audit.questions) CHECK(q.backend_calls == 1);
    for (const auto& d : ev.demos) CHECK(d.rationale.origin.kind == OriginKind::FewShotGreedy);
  }
}

TEST_CASE("evaluate_batch keeps sample order and preserves partial results") {
  auto ds = testing::small_dataset(40);
  MockBackend mock(MockScript{}, AnswerKey(ds));
  auto ev = evaluate_batch(whole(ds), Prompt{}, mock, ds.task);
  REQUIRE(ev.demos.size() == 40);
  for (std::size_t i = 0; i < 40; ++i) {
    CHECK(ev.demos[i].sample_id == ds.samples[i].id);
    CHECK(ev.audit.questions[i].sample_id == ds.samples[i].id);
  }

  struct Serial : testing::FailingBackend {
    using FailingBackend::FailingBackend;
    std::size_t max_in_flight() const override { return 1; }
  };
  MockBackend fresh(MockScript{}, AnswerKey(ds));
  Serial failing(fresh, 21);
  auto broken = evaluate_batch(whole(ds), Prompt{}, failing, ds.task);
  REQUIRE(broken.failure.has_value());
  CHECK(broken.metrics.n == 10);
  CHECK(broken.demos.size() == 10);
}

TEST_CASE("few_shot_rationale") {
  auto r = few_shot_rationale(" Step 1: add.\nSo the result is 4. The answer is 4.");
  CHECK(r.text == "Step 1: add.\nSo the result is 4.");
  CHECK(r.newline_count == 1);
  CHECK(few_shot_rationale(" no anchor here").text == "no anchor here");
}

TEST_CASE("run_stream shape") {
  auto ds = testing::small_dataset(600);
  MockBackend mock(MockScript{}, AnswerKey(ds));
  StrategyConfig cfg;
  cfg.kind = StrategyKind::ShallowReplace;
  auto report = run_stream(ds, 10, cfg, mock, 2048, 0);
  REQUIRE(report.batches.size() == 10);
  std::size_t total = 0;
  std::set<std::string> ids;
  for (const auto& b : report.batches) {
    CHECK(b.n == 60);
    CHECK(b.accuracy == doctest::Approx(static_cast<double>(b.n_correct) / b.n));
    total += b.n;
  }
  CHECK(total == 600);
  CHECK(report.totals.n == 600);
  CHECK_FALSE(report.aborted_at_batch.has_value());
  CHECK(report.prompt_updates == 9);
  for (const auto& a : report.audit) {
    for (const auto& q : a.questions) {
      CHECK(q.prompt_hash == a.prompt_hash);
      CHECK(ids.insert(q.sample_id).second);
      CHECK(q.rendered_tokens <= 2048);
    }
  }
  CHECK(ids.size() == 600);

  StreamOptions opts;
  opts.update_after_final = true;
  MockBackend again(MockScript{}, AnswerKey(ds));
  CHECK(run_stream(ds, 10, cfg, again, 2048, 0, opts).prompt_updates == 10);
}

TEST_CASE("run_stream zero-shot keeps the empty prompt") {
  auto ds = testing::small_dataset(50);
  MockBackend mock(MockScript{}, AnswerKey(ds));
  StrategyConfig cfg;
  cfg.kind = StrategyKind::ZeroShot;
  auto report = run_stream(ds, 5, cfg, mock, 2048, 0);
  for (const auto& a : report.audit) {
    CHECK(a.prompt.demos.empty());
    for (const auto& q : a.questions) CHECK(q.backend_calls == 2);
  }
  CHECK(mock.calls() == 100);
}

TEST_CASE("run_stream is deterministic and round-trips") {
  auto ds = testing::small_dataset(120, TaskKind::YesNo, 4);
  StrategyConfig cfg;
  cfg.kind = StrategyKind::WrongSubstitute;
  MockScript script;
  script.seed = 42;
  MockBackend a(script, AnswerKey(ds));
  MockBackend b(script, AnswerKey(ds));
  auto ra = run_stream(ds, 10, cfg, a, 2048, 42);
  auto rb = run_stream(ds, 10, cfg, b, 2048, 42);
  CHECK(report_json(ra) == report_json(rb));
  CHECK(report_csv(ra) == report_csv(rb));

  auto parsed = parse_report_json(report_json(ra));
  CHECK(parsed == ra);
  CHECK(report_json(parsed) == report_json(ra));

  auto csv = report_csv(ra);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 11);
  CHECK(csv.substr(0, csv.find('\n')) == kReportCsvHeader);
  auto row = csv.substr(csv.find('\n') + 1);
  row = row.substr(0, row.find('\n'));
  std::vector<std::string> cells;
  std::stringstream cs(row);
  for (std::string cell; std::getline(cs, cell, ',');) cells.push_back(cell);
  REQUIRE(cells.size() == 9);
  CHECK(cells[3].size() == 6);  // 0.xxxx
  CHECK(cells[8] == "wrong_substitute");

  testing::TempDir dir("report");
  write_report(ra, dir / "r.json", ReportFormat::Json);
  write_report(ra, dir / "r.csv", ReportFormat::Csv);
  write_audit_jsonl(ra, dir / "audit.jsonl");
  CHECK(testing::read_text(dir / "r.json") == report_json(ra));
  CHECK(testing::read_text(dir / "r.csv") == csv);
  auto audit = testing::read_text(dir / "audit.jsonl");
  CHECK(std::count(audit.begin(), audit.end(), '\n') == 10);
  CHECK_THROWS_AS(write_report(ra, dir / "missing" / "r.json", ReportFormat::Json), Error);
  CHECK_THROWS_AS(parse_report_json("{"), Error);
}

TEST_CASE("run_stream abort marker") {
  auto ds = testing::small_dataset(100);
  MockBackend mock(MockScript{}, AnswerKey(ds));
  testing::FailingBackend failing(mock, 30);
  StrategyConfig cfg;
  cfg.kind = StrategyKind::ZeroShot;
  auto report = run_stream(ds, 10, cfg, failing, 2048, 0);
  REQUIRE(report.aborted_at_batch.has_value());
  CHECK(*report.aborted_at_batch == 2);
  CHECK(report.batches.size() == 1);
  CHECK(report.abort_reason.find("simulated outage") != std::string::npos);
  CHECK(parse_report_json(report_json(report)) == report);
}

TEST_CASE("run_stream budget failure aborts") {
  Dataset ds;
  ds.name = "long";
  ds.samples.push_back(Sample{"x", std::string(400, 'q'), "1", TaskKind::Arithmetic});
  MockBackend mock(MockScript{}, AnswerKey(ds));
  auto report = run_stream(ds, 1, StrategyConfig{}, mock, 20, 0);
  CHECK(report.aborted_at_batch == std::optional<std::size_t>(1));
  CHECK(mock.calls() == 0);
}

TEST_CASE("timing only when asked") {
  auto ds = testing::small_dataset(10);
  MockBackend mock(MockScript{}, AnswerKey(ds));
  CHECK_FALSE(run_stream(ds, 2, StrategyConfig{}, mock, 2048, 0).wall_clock_seconds.has_value());
  StreamOptions opts;
  opts.record_timing = true;
  CHECK(run_stream(ds, 2, StrategyConfig{}, mock, 2048, 0, opts).wall_clock_seconds.has_value());
}
