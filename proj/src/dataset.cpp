#include "cotstream/dataset.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

#include "cotstream/error.hpp"
#include "text_util.hpp"

namespace cotstream {

using nlohmann::json;

std::string normalize_gold(std::string_view raw, TaskKind task) {
  if (task == TaskKind::Arithmetic) {
    auto marker = raw.rfind("####");
    if (marker != std::string_view::npos) raw = detail::trim(raw.substr(marker + 4));
  }
  return extract_answer(raw, task);
}

namespace {

std::string answer_text(const json& answer, TaskKind task) {
  if (answer.is_string()) return answer.get<std::string>();
  if (answer.is_boolean()) return answer.get<bool>() ? "yes" : "no";
  if (answer.is_number_integer()) return std::to_string(answer.get<long long>());
  if (answer.is_number()) return answer.dump();
  (void)task;
  return {};
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& path, TaskKind task,
                     std::optional<std::size_t> limit) {
  if (limit && *limit == 0) throw Error(ErrorKind::Validation, "dataset limit must be positive");
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot read dataset " + path.string());

  Dataset ds;
  ds.name = path.stem().string();
  ds.task = task;
  std::set<std::string> seen;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (limit && ds.samples.size() == *limit) break;
    if (detail::trim(line).empty()) continue;

    auto fail = [&](const std::string& why) {
      return Error(ErrorKind::Parse,
                   path.string() + ":" + std::to_string(line_no) + ": " + why);
    };
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw fail(std::string("malformed JSON: ") + e.what());
    }
    if (!rec.is_object()) throw fail("record is not an object");
    if (!rec.contains("question") || !rec["question"].is_string())
      throw fail("missing string field 'question'");
    if (!rec.contains("answer")) throw fail("missing field 'answer'");

    Sample s;
    s.task = task;
    s.question = rec["question"].get<std::string>();
    if (detail::trim(s.question).empty()) throw fail("empty question");
    s.gold = normalize_gold(answer_text(rec["answer"], task), task);
    if (s.gold.empty()) throw fail("answer has no " + std::string(to_string(task)) + " value");
    if (rec.contains("id")) {
      if (!rec["id"].is_string()) throw fail("'id' must be a string");
      s.id = rec["id"].get<std::string>();
    } else {
      s.id = ds.name + ":" + std::to_string(line_no);
    }
    if (!seen.insert(s.id).second) throw fail("duplicate id '" + s.id + "'");
    ds.samples.push_back(std::move(s));
  }

  if (ds.samples.empty()) throw Error(ErrorKind::Validation, "dataset " + path.string() + " is empty");
  if (limit && ds.samples.size() < *limit) {
    throw Error(ErrorKind::Validation, "limit " + std::to_string(*limit) + " exceeds the " +
                                           std::to_string(ds.samples.size()) +
                                           " records in " + path.string());
  }
  return ds;
}

std::vector<Batch> partition(const Dataset& dataset, std::size_t m) {
  const auto n = dataset.samples.size();
  if (m == 0) throw Error(ErrorKind::Validation, "batch count must be at least 1");
  if (m > n) {
    throw Error(ErrorKind::Validation, "cannot split " + std::to_string(n) + " samples into " +
                                           std::to_string(m) + " batches");
  }
  std::vector<Batch> batches;
  batches.reserve(m);
  const auto base = n / m;
  const auto extra = n % m;
  auto it = dataset.samples.begin();
  for (std::size_t k = 0; k < m; ++k) {
    auto size = base + (k < extra ? 1 : 0);
    Batch b;
    b.index = k + 1;
    b.samples.assign(it, it + static_cast<std::ptrdiff_t>(size));
    it += static_cast<std::ptrdiff_t>(size);
    batches.push_back(std::move(b));
  }
  return batches;
}

}  // namespace cotstream
