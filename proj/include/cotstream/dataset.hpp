#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cotstream/grading.hpp"

namespace cotstream {

struct Sample {
  std::string id;
  std::string question;
  std::string gold;  // canonical, see extract_answer
  TaskKind task = TaskKind::Arithmetic;

  bool operator==(const Sample&) const = default;
};

struct Dataset {
  std::string name;
  TaskKind task = TaskKind::Arithmetic;
  std::vector<Sample> samples;
};

struct Batch {
  std::size_t index = 1;  // 1-based stream step
  std::vector<Sample> samples;
};

// Reads line-delimited JSON records ({"question", "answer", optional "id"}).
// The dataset name is the file stem. Gold answers are canonicalized with the
// task's extraction rules; for arithmetic answers carrying "#### <x>" only the
// text after the final marker is used. Blank lines are skipped.
Dataset load_dataset(const std::filesystem::path& path, TaskKind task,
                     std::optional<std::size_t> limit = std::nullopt);

// Canonical gold answer for a raw answer field, "" if it has no answer.
std::string normalize_gold(std::string_view raw, TaskKind task);

// m contiguous batches in file order; the first size % m batches get one extra.
std::vector<Batch> partition(const Dataset& dataset, std::size_t m);

}  // namespace cotstream
