#include "cotstream/simulate.hpp"

#include <atomic>
#include <cmath>
#include <charconv>
#include <cstdio>
#include <mutex>
#include <sstream>
#include <thread>

#include "cotstream/error.hpp"
#include "cotstream/hash.hpp"
#include "cotstream/stream.hpp"

namespace cotstream {

double SimulationResult::mean_accuracy(std::size_t strategy_index) const {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& seed : accuracy.at(strategy_index)) {
    for (double a : seed) {
      sum += a;
      ++count;
    }
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

SimulationResult simulate(const SimulationSpec& spec) {
  if (spec.strategies.empty()) throw Error(ErrorKind::Validation, "simulate needs at least one strategy");
  if (spec.seed_end <= spec.seed_begin) throw Error(ErrorKind::Validation, "empty seed range");
  const auto n_seeds = static_cast<std::size_t>(spec.seed_end - spec.seed_begin);
  const auto n_jobs = spec.strategies.size() * n_seeds;

  SimulationResult result;
  result.accuracy.assign(spec.strategies.size(), std::vector<std::vector<double>>(n_seeds));

  std::atomic<std::size_t> next{0};
  std::mutex error_mu;
  std::string error;
  auto worker = [&] {
    while (true) {
      auto job = next.fetch_add(1);
      if (job >= n_jobs) return;
      const auto s = job / n_seeds;
      const auto seed = spec.seed_begin + job % n_seeds;
      try {
        auto script = spec.mock;
        script.seed = seed;
        MockBackend backend(script, AnswerKey(spec.dataset));
        auto cfg = spec.strategy;
        cfg.kind = spec.strategies[s];
        StreamOptions options;
        options.decoding = spec.decoding;
        auto report = run_stream(spec.dataset, spec.batches, cfg, backend, spec.budget_tokens, seed, options);
        if (report.aborted_at_batch) throw Error(ErrorKind::Backend, report.abort_reason);
        auto& row = result.accuracy[s][job % n_seeds];
        for (const auto& b : report.batches) row.push_back(b.accuracy);
      } catch (const std::exception& e) {
        std::lock_guard lock(error_mu);
        if (error.empty()) error = e.what();
        next.store(n_jobs);
      }
    }
  };
  auto threads = spec.threads != 0 ? spec.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, n_jobs);
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (!error.empty()) throw Error(ErrorKind::Backend, "simulation failed: " + error);

  for (std::size_t s = 0; s < spec.strategies.size(); ++s) {
    for (std::size_t b = 0; b < spec.batches; ++b) {
      AggregateRow row;
      row.strategy = spec.strategies[s];
      row.batch = b + 1;
      row.seeds = n_seeds;
      double sum = 0.0;
      for (const auto& seed : result.accuracy[s]) sum += seed.at(b);
      row.mean_accuracy = sum / static_cast<double>(n_seeds);
      if (n_seeds > 1) {
        double sq = 0.0;
        for (const auto& seed : result.accuracy[s]) sq += (seed[b] - row.mean_accuracy) * (seed[b] - row.mean_accuracy);
        row.stddev_accuracy = std::sqrt(sq / static_cast<double>(n_seeds - 1));
      }
      result.rows.push_back(row);
    }
  }
  return result;
}

std::string aggregate_csv(const std::vector<AggregateRow>& rows) {
  std::ostringstream os;
  os << kAggregateCsvHeader << '\n';
  char buf[64];
  for (const auto& r : rows) {
    os << to_string(r.strategy) << ',' << r.batch << ',';
    std::snprintf(buf, sizeof buf, "%.4f,%.4f", r.mean_accuracy, r.stddev_accuracy);
    os << buf << ',' << r.seeds << '\n';
  }
  return os.str();
}

std::pair<std::uint64_t, std::uint64_t> parse_seed_range(std::string_view text) {
  auto parse = [&](std::string_view s) {
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || p != s.data() + s.size())
      throw Error(ErrorKind::Validation, "bad seed range '" + std::string(text) + "' (expected a..b)");
    return v;
  };
  auto dots = text.find("..");
  if (dots == std::string_view::npos) {
    auto v = parse(text);
    return {v, v + 1};
  }
  auto a = parse(text.substr(0, dots));
  auto b = parse(text.substr(dots + 2));
  if (b <= a) throw Error(ErrorKind::Validation, "seed range '" + std::string(text) + "' is empty");
  return {a, b};
}

Dataset synthetic_dataset(TaskKind task, std::size_t n, std::uint64_t seed) {
  Dataset ds;
  ds.name = "synthetic-" + std::string(to_string(task));
  ds.task = task;
  std::uint64_t state = splitmix64(seed);
  auto draw = [&](std::uint64_t bound) {
    state = splitmix64(state);
    return state % bound;
  };
  static constexpr std::string_view kWords[] = {"apple", "river", "stone", "cloud", "maple",
                                                "tiger", "lemon", "piano", "quartz", "violet"};
  for (std::size_t i = 0; i < n; ++i) {
    Sample s;
    s.id = ds.name + ":" + std::to_string(i + 1);
    s.task = task;
    switch (task) {
      case TaskKind::Arithmetic: {
        auto a = draw(90) + 10;
        auto b = draw(90) + 10;
        auto c = draw(9) + 1;
        s.question = "Item " + std::to_string(i + 1) + ": a shop has " + std::to_string(a) +
                     " boxes, receives " + std::to_string(b) + " more, then ships " +
                     std::to_string(c) + ". How many boxes remain?";
        s.gold = std::to_string(a + b - c);
        break;
      }
      case TaskKind::YesNo: {
        auto a = draw(100);
        auto b = draw(100);
        s.question = "Item " + std::to_string(i + 1) + ": is " + std::to_string(a) +
                     " greater than " + std::to_string(b) + "?";
        s.gold = a > b ? "yes" : "no";
        break;
      }
      case TaskKind::SymbolicString: {
        auto w1 = kWords[draw(10)];
        auto w2 = kWords[draw(10)];
        s.question = "Item " + std::to_string(i + 1) + ": take the last letters of the words in \"" +
                     std::string(w1) + " " + std::string(w2) + "\" and concatenate them.";
        s.gold = std::string(1, w1.back()) + std::string(1, w2.back());
        break;
      }
    }
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

}  // namespace cotstream
