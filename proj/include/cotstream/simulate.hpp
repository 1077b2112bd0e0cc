#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cotstream/backend.hpp"
#include "cotstream/dataset.hpp"
#include "cotstream/strategies.hpp"

namespace cotstream {

struct SimulationSpec {
  Dataset dataset;
  std::size_t batches = 10;
  std::vector<StrategyKind> strategies;
  std::uint64_t seed_begin = 0;
  std::uint64_t seed_end = 30;  // exclusive
  StrategyConfig strategy;      // kind is replaced per strategy
  MockScript mock;              // seed is replaced per run
  std::size_t budget_tokens = kDefaultBudgetTokens;
  DecodingParams decoding;
  std::size_t threads = 0;  // 0: hardware concurrency
};

struct AggregateRow {
  StrategyKind strategy = StrategyKind::ZeroShot;
  std::size_t batch = 1;
  double mean_accuracy = 0.0;
  double stddev_accuracy = 0.0;  // sample standard deviation across seeds
  std::size_t seeds = 0;
};

struct SimulationResult {
  // accuracy[strategy][seed][batch]
  std::vector<std::vector<std::vector<double>>> accuracy;
  std::vector<AggregateRow> rows;  // strategy-major, then batch order

  // Mean per-batch accuracy of one strategy over all seeds and batches.
  double mean_accuracy(std::size_t strategy_index) const;
};

// Runs every (strategy, seed) pair against a fresh scripted mock.
SimulationResult simulate(const SimulationSpec& spec);

inline constexpr std::string_view kAggregateCsvHeader =
    "strategy,batch,mean_accuracy,stddev_accuracy,seeds";
std::string aggregate_csv(const std::vector<AggregateRow>& rows);

// "a..b" is the half-open range [a, b); a single number n means [n, n+1).
std::pair<std::uint64_t, std::uint64_t> parse_seed_range(std::string_view text);

// Generated corpus for simulations without a dataset file.
Dataset synthetic_dataset(TaskKind task, std::size_t n, std::uint64_t seed = 0);

}  // namespace cotstream
