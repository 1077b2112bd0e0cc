#include <doctest.h>

#include <random>
#include <set>
#include <unordered_set>

#include "cotstream/backend.hpp"
#include "cotstream/error.hpp"
#include "support.hpp"

using namespace cotstream;

namespace {

CompletionRequest request(std::string prompt, double temperature = 0.0) {
  CompletionRequest r;
  r.prompt = std::move(prompt);
  r.temperature = temperature;
  r.model_id = "text-davinci-002";
  return r;
}

AnswerKey key_for(const Sample& s) {
  AnswerKey key;
  key.add(s.question, s.gold, s.task);
  return key;
}

}  // namespace

TEST_CASE("canonical request json") {
  auto r = request("Q: hi\nA:");
  CHECK(canonical_request_json(r) ==
        "{\"max_tokens\":256,\"model\":\"text-davinci-002\",\"prompt\":\"Q: hi\\nA:\",\"stop\":[\"Q:\"],"
        "\"temperature\":0.0}");
  CHECK(cache_key(r).size() == 64);
  auto r2 = r;
  r2.temperature = 0.7;
  CHECK(cache_key(r) != cache_key(r2));
}

TEST_CASE("cache keys do not collide") {
  std::mt19937_64 rng(2024);
  std::unordered_set<std::string> keys;
  std::unordered_set<std::string> canon;
  const char alphabet[] = "abcQA:\n 0123456789.";
  for (int i = 0; i < 100000; ++i) {
    CompletionRequest r;
    auto len = std::uniform_int_distribution<int>(1, 24)(rng);
    for (int j = 0; j < len; ++j) r.prompt += alphabet[std::uniform_int_distribution<int>(0, sizeof alphabet - 2)(rng)];
    r.max_tokens = std::uniform_int_distribution<std::size_t>(1, 512)(rng);
    r.temperature = std::uniform_int_distribution<int>(0, 20)(rng) / 10.0;
    r.model_id = rng() % 2 ? "m1" : "m2";
    if (!canon.insert(canonical_request_json(r)).second) continue;
    REQUIRE(keys.insert(cache_key(r)).second);
  }
  CHECK(keys.size() == canon.size());
  CHECK(keys.size() > 90000);
}

TEST_CASE("mock determinism and forcing") {
  Sample s{"a", "What is 12+30?", "42", TaskKind::Arithmetic};
  MockScript script;
  script.seed = 7;
  MockBackend a(script, key_for(s));
  MockBackend b(script, key_for(s));
  auto prompt = "Q: " + s.question + "\nA: Let's think step by step.";
  auto r1 = a.complete(request(prompt));
  auto r2 = a.complete(request(prompt));
  CHECK(r1 == r2);
  CHECK(b.complete(request(prompt)) == r1);

  // Sampled requests vary per attempt but replay identically in a fresh mock.
  std::vector<std::string> first, second;
  MockBackend c(script, key_for(s));
  MockBackend d(script, key_for(s));
  for (int i = 0; i < 20; ++i) {
    first.push_back(c.complete(request(prompt, 0.7)).text);
    second.push_back(d.complete(request(prompt, 0.7)).text);
  }
  CHECK(first == second);
  CHECK(std::set<std::string>(first.begin(), first.end()).size() > 1);

  script.correct_base = 1.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    script.seed = seed;
    MockBackend forced(script, key_for(s));
    auto zs = zero_shot_cot(s, forced, 0.0);
    CHECK(grade(extract_answer(zs.answer_completion, s.task), s.gold, s.task).correct);
  }

  script.correct_base = 0.0;
  script.shallow_bonus = 0.0;
  MockBackend never(script, key_for(s));
  auto zs = zero_shot_cot(s, never, 0.0);
  CHECK(extract_answer(zs.answer_completion, s.task) == "43");
}

TEST_CASE("mock composition") {
  Sample s{"a", "What is 1+1?", "2", TaskKind::Arithmetic};
  AnswerKey key = key_for(s);
  key.add("What is 5+5?", "10", TaskKind::Arithmetic);
  key.add("What is 6+6?", "12", TaskKind::Arithmetic);
  MockBackend mock(MockScript{}, key);
  std::string prompt =
      "Q: What is 5+5?\nA: a\nb\nc\nd The answer is 11.\n\n"
      "Q: What is 6+6?\nA: short The answer is 12.\n\n"
      "Q: What is 1+1?\nA:";
  auto c = mock.composition(prompt);
  CHECK(c.n_demos == 2);
  CHECK(c.shallow_fraction == doctest::Approx(0.5));
  CHECK(c.wrong_fraction == doctest::Approx(0.5));
  CHECK(mock.decide(prompt, 0.0, 0).probability == doctest::Approx(0.6 + 0.1 - 0.05));

  MockScript wide;
  wide.correct_base = 0.95;
  wide.shallow_bonus = 0.5;
  MockBackend clamp(wide, key);
  CHECK(clamp.decide(prompt, 0.0, 0).probability == 1.0);

  auto r = mock.complete(request(prompt));
  CHECK(extract_answer(r.text, TaskKind::Arithmetic).size() > 0);
  CHECK(r.text.find("The answer is") != std::string::npos);
}

TEST_CASE("mock wrong answers") {
  CHECK(MockBackend::wrong_answer("7", TaskKind::Arithmetic) == "8");
  CHECK(MockBackend::wrong_answer("-1", TaskKind::Arithmetic) == "0");
  CHECK(MockBackend::wrong_answer("2.5", TaskKind::Arithmetic) == "3.5");
  CHECK(MockBackend::wrong_answer("yes", TaskKind::YesNo) == "no");
  CHECK(MockBackend::wrong_answer("no", TaskKind::YesNo) == "yes");
  CHECK(MockBackend::wrong_answer("ab", TaskKind::SymbolicString) == "abz");
  CHECK(count_newlines(MockBackend::rationale_text(4, "x")) == 4);
}

TEST_CASE("mock truncates at max_tokens") {
  MockBackend mock(MockScript{}, AnswerKey{});
  mock.push_scripted(std::string(100, 'x'));
  auto r = request("Q: anything\nA:");
  r.max_tokens = 5;
  auto out = mock.complete(r);
  CHECK(out.finish_reason == FinishReason::Length);
  CHECK(out.completion_tokens == 5);
  CHECK(out.text.size() == 20);
}

TEST_CASE("zero_shot_cot") {
  Sample s{"a", "What is 2+2?", "4", TaskKind::Arithmetic};
  MockBackend mock(MockScript{}, key_for(s));
  testing::CountingBackend counted(mock);

  mock.push_scripted("2+2 is 4.");
  mock.push_scripted(" 4.");
  auto zs = zero_shot_cot(s, counted, 0.0);
  CHECK(zs.rationale.text == "2+2 is 4.");
  CHECK(extract_answer(zs.answer_completion, s.task) == "4");
  CHECK(counted.calls == 2);
  CHECK_FALSE(zs.empty_rationale);

  mock.push_scripted(" one\ntwo\nthree\nfour\n");
  mock.push_scripted(" 4.");
  CHECK(zero_shot_cot(s, mock, 0.0).rationale.newline_count == 3);

  mock.push_scripted("");
  mock.push_scripted(" 4.");
  CHECK(zero_shot_cot(s, mock, 0.0).empty_rationale);

  auto x = zero_shot_cot(s, mock, 0.0);
  auto y = zero_shot_cot(s, mock, 0.0);
  CHECK(x.rationale == y.rationale);
  CHECK(x.answer_completion == y.answer_completion);

  // Both stages use the stop sequence and the stage-2 prompt extends stage 1.
  struct Recorder : Backend {
    std::vector<CompletionRequest> seen;
    CompletionResponse complete(const CompletionRequest& r) override {
      seen.push_back(r);
      return {seen.size() == 1 ? " Think.\nDone." : " 4.", FinishReason::Stop, 1, 1};
    }
    std::string identity() const override { return "recorder"; }
  } rec;
  zero_shot_cot(s, rec, 0.3);
  REQUIRE(rec.seen.size() == 2);
  CHECK(rec.seen[0].prompt == "Q: What is 2+2?\nA: Let's think step by step.");
  CHECK(rec.seen[1].prompt == "Q: What is 2+2?\nA: Let's think step by step. Think.\nDone.\nTherefore, the answer is");
  for (const auto& r : rec.seen) {
    CHECK(r.stop == std::vector<std::string>{"Q:"});
    CHECK(r.temperature == 0.3);
    CHECK(r.max_tokens == 256);
    CHECK(r.model_id == "text-davinci-002");
  }
}

TEST_CASE("cache record and replay") {
  testing::TempDir dir("cache");
  auto path = dir / "cache.jsonl";
  Sample s{"a", "What is 9+9?", "18", TaskKind::Arithmetic};
  auto mock = std::make_shared<MockBackend>(MockScript{}, key_for(s));
  std::vector<CompletionResponse> recorded;
  {
    CachedBackend cache(mock, path);
    auto r = request("Q: What is 9+9?\nA: Let's think step by step.");
    recorded.push_back(cache.complete(r));
    CHECK(cache.inner_calls() == 1);
    CHECK(cache.complete(r) == recorded[0]);
    CHECK(cache.inner_calls() == 1);
    CHECK(cache.hits() == 1);
    for (int i = 0; i < 3; ++i) recorded.push_back(cache.complete(request(r.prompt, 0.9)));
    CHECK(cache.inner_calls() == 4);
  }
  auto lines = testing::read_text(path);
  CHECK(std::count(lines.begin(), lines.end(), '\n') == 4);
  auto first = nlohmann::json::parse(lines.substr(0, lines.find('\n')));
  CHECK(first.contains("key"));
  CHECK(first.contains("request"));
  CHECK(first.contains("response"));

  struct Refuse : Backend {
    CompletionResponse complete(const CompletionRequest&) override {
      throw Error(ErrorKind::Backend, "no network in replay");
    }
    std::string identity() const override { return "refuse"; }
  };
  CachedBackend replay(std::make_shared<Refuse>(), path);
  auto r = request("Q: What is 9+9?\nA: Let's think step by step.");
  CHECK(replay.complete(r) == recorded[0]);
  for (int i = 1; i <= 3; ++i) CHECK(replay.complete(request(r.prompt, 0.9)) == recorded[i]);
  CHECK(replay.inner_calls() == 0);
  CHECK_THROWS_AS(replay.complete(request(r.prompt, 0.9)), Error);

  auto bad = dir / "bad.jsonl";
  testing::write_text(bad, lines.substr(0, lines.find('\n') + 1) + "{broken\n");
  try {
    CachedBackend broken(mock, bad);
    FAIL("expected a corrupt cache error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find(":2") != std::string::npos);
  }
}

TEST_CASE("http backend against a local endpoint") {
  Sample s{"a", "What is 3+3?", "6", TaskKind::Arithmetic};
  MockBackend model(MockScript{}, key_for(s));
  testing::FakeCompletionsServer server(model);

  HttpConfig cfg;
  cfg.base_url = server.base_url();
  cfg.api_key = "secret-key";
  cfg.initial_backoff = std::chrono::milliseconds(1);
  HttpBackend http(cfg);
  CHECK(http.identity() == "http:" + server.base_url());

  auto r = request("Q: What is 3+3?\nA: Let's think step by step.");
  auto direct = MockBackend(MockScript{}, key_for(s)).complete(r);
  auto out = http.complete(r);
  CHECK(out.text == direct.text);
  CHECK(out.completion_tokens == direct.completion_tokens);
  CHECK(server.last_auth == "Bearer secret-key");
  CHECK(server.hits == 1);

  server.fail_next = 2;
  CHECK(http.complete(r).text == direct.text);
  CHECK(server.hits == 4);

  server.fail_next = 3;
  CHECK_THROWS_AS(http.complete(r), Error);
  CHECK(server.hits == 7);

  server.fail_status = 400;
  server.fail_next = 1;
  try {
    http.complete(r);
    FAIL("expected an HTTP error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Backend);
    CHECK(std::string(e.what()).find("400") != std::string::npos);
    CHECK(std::string(e.what()).find("try again") != std::string::npos);
  }
  CHECK(server.hits == 8);

  HttpConfig dead = cfg;
  dead.base_url = "http://127.0.0.1:1";
  dead.max_attempts = 2;
  CHECK_THROWS_AS(HttpBackend(dead).complete(r), Error);
}

TEST_CASE("parse_completion_body") {
  auto r = request("Q: x\nA:");
  auto out = parse_completion_body(
      R"({"choices":[{"text":" hi","finish_reason":"length"}],"usage":{"prompt_tokens":3,"completion_tokens":1}})", r);
  CHECK(out.text == " hi");
  CHECK(out.finish_reason == FinishReason::Length);
  CHECK(out.prompt_tokens == 3);
  CHECK_THROWS_AS(parse_completion_body("{}", r), Error);
  CHECK_THROWS_AS(parse_completion_body("not json", r), Error);
}

TEST_CASE("http config from environment") {
  ::unsetenv("COTSTREAM_API_KEY");
  ::setenv("COTSTREAM_BASE_URL", "http://localhost:9", 1);
  CHECK_THROWS_AS(HttpConfig::from_env(), Error);
  ::setenv("COTSTREAM_API_KEY", "k", 1);
  auto cfg = HttpConfig::from_env();
  CHECK(cfg.api_key == "k");
  CHECK(cfg.base_url == "http://localhost:9");
  ::unsetenv("COTSTREAM_API_KEY");
  ::unsetenv("COTSTREAM_BASE_URL");
}
