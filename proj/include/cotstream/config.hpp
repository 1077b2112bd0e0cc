#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "cotstream/backend.hpp"
#include "cotstream/strategies.hpp"
#include "cotstream/stream.hpp"

namespace cotstream {

// --- minimal TOML reader ----------------------------------------------------
//
// Supports what run files need: [section] headers, `key = value` with basic
// strings, integers, floats, booleans and single-line arrays of those, and
// '#' comments. Anything else is a parse error with its line number.

struct TomlValue;
using TomlArray = std::vector<TomlValue>;
struct TomlValue {
  std::variant<std::string, std::int64_t, double, bool, TomlArray> v;
  std::size_t line = 0;
};
using TomlTable = std::map<std::string, std::map<std::string, TomlValue>>;

TomlTable parse_toml(std::string_view text, std::string_view source = "<config>");

// --- run configuration --------------------------------------------------------

enum class BackendKind { Mock, Http, CachedHttp, CachedMock };
std::string_view to_string(BackendKind kind);
BackendKind backend_kind_from_string(std::string_view name);

struct RunConfig {
  // [dataset]
  std::filesystem::path dataset_path;
  std::optional<TaskKind> task;
  std::optional<std::size_t> limit;
  // [stream]
  std::size_t batches = 10;
  std::size_t budget_tokens = kDefaultBudgetTokens;
  std::uint64_t seed = 0;
  bool update_after_final = false;
  // [strategy]
  StrategyConfig strategy;
  // [backend]
  BackendKind backend = BackendKind::Mock;
  std::filesystem::path cache_path;
  DecodingParams decoding;
  std::size_t in_flight = 4;
  std::size_t max_attempts = 3;
  std::size_t initial_backoff_ms = 1000;
  // [mock]; the mock seed always follows the run seed
  MockScript mock;
  // [output]
  std::filesystem::path out_path;
  ReportFormat format = ReportFormat::Json;
  std::filesystem::path audit_path;
  bool timing = false;
};

// Unknown sections or keys are rejected. Relative paths are resolved against
// base_dir.
RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir,
                           std::string_view source = "<config>");
RunConfig load_run_config(const std::filesystem::path& path);

// Throws Error(Validation) with a one-line message.
void validate(const RunConfig& cfg);

// Round-trips through parse_run_config.
std::string to_toml(const RunConfig& cfg);

// Experiment-defining part of the config (output locations excluded), as
// embedded in reports. config_hash is its SHA-256.
nlohmann::json config_snapshot(const RunConfig& cfg);
std::string config_hash(const RunConfig& cfg);

// Builds the configured backend; the mock is keyed with the dataset's answers.
std::shared_ptr<Backend> make_backend(const RunConfig& cfg, const Dataset& dataset);

}  // namespace cotstream
