#include "cotstream/config.hpp"

#include <cstdlib>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "cotstream/error.hpp"
#include "cotstream/hash.hpp"
#include "cotstream/json_io.hpp"
#include "text_util.hpp"

namespace cotstream {

using nlohmann::json;

// --- TOML ---------------------------------------------------------------------

namespace {

class TomlLineParser {
 public:
  TomlLineParser(std::string_view text, std::string_view source, std::size_t line)
      : s_(text), source_(source), line_(line) {}

  TomlValue value() {
    skip_ws();
    if (eof()) fail("missing value");
    TomlValue out;
    out.line = line_;
    char c = s_[pos_];
    if (c == '"') {
      out.v = string();
    } else if (c == '[') {
      ++pos_;
      TomlArray items;
      skip_ws();
      if (!eof() && s_[pos_] == ']') {
        ++pos_;
      } else {
        while (true) {
          items.push_back(value());
          skip_ws();
          if (eof()) fail("unterminated array");
          if (s_[pos_] == ',') {
            ++pos_;
            skip_ws();
            if (!eof() && s_[pos_] == ']') {
              ++pos_;
              break;
            }
            continue;
          }
          if (s_[pos_] == ']') {
            ++pos_;
            break;
          }
          fail("expected ',' or ']' in array");
        }
      }
      out.v = std::move(items);
    } else {
      std::size_t start = pos_;
      while (!eof() && s_[pos_] != ',' && s_[pos_] != ']' && !detail::is_space(s_[pos_])) ++pos_;
      out.v = scalar(s_.substr(start, pos_ - start));
    }
    return out;
  }

  void expect_end() {
    skip_ws();
    if (!eof() && s_[pos_] != '#') fail("unexpected trailing characters");
  }

 private:
  bool eof() const { return pos_ >= s_.size(); }
  void skip_ws() {
    while (!eof() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }
  [[noreturn]] void fail(const std::string& why) const {
    throw Error(ErrorKind::Parse, std::string(source_) + ":" + std::to_string(line_) + ": " + why);
  }

  std::string string() {
    ++pos_;  // opening quote
    std::string out;
    while (true) {
      if (eof()) fail("unterminated string");
      char c = s_[pos_++];
      if (c == '"') return out;
      if (c != '\\') {
        out += c;
        continue;
      }
      if (eof()) fail("unterminated escape");
      char e = s_[pos_++];
      switch (e) {
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        default: fail(std::string("unsupported escape \\") + e);
      }
    }
  }

  std::variant<std::string, std::int64_t, double, bool, TomlArray> scalar(std::string_view tok) {
    if (tok == "true") return true;
    if (tok == "false") return false;
    if (tok.empty()) fail("missing value");
    bool is_float = tok.find_first_of(".eE") != std::string_view::npos &&
                    tok.find_first_not_of("+-0123456789.eE") == std::string_view::npos;
    std::string_view body = tok;
    if (body.front() == '+') body.remove_prefix(1);
    if (is_float) {
      double d = 0;
      auto [p, ec] = std::from_chars(body.data(), body.data() + body.size(), d);
      if (ec == std::errc{} && p == body.data() + body.size()) return d;
    } else {
      std::int64_t i = 0;
      auto [p, ec] = std::from_chars(body.data(), body.data() + body.size(), i);
      if (ec == std::errc{} && p == body.data() + body.size()) return i;
    }
    fail("cannot parse value '" + std::string(tok) + "' (strings need double quotes)");
  }

  std::string_view s_;
  std::string_view source_;
  std::size_t line_;
  std::size_t pos_ = 0;
};

bool valid_name(std::string_view name) {
  if (name.empty()) return false;
  for (char c : name) {
    if (!detail::is_alnum(c) && c != '_' && c != '-') return false;
  }
  return true;
}

}  // namespace

TomlTable parse_toml(std::string_view text, std::string_view source) {
  TomlTable table;
  std::string section;
  table[section];
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    auto fail = [&](const std::string& why) {
      return Error(ErrorKind::Parse, std::string(source) + ":" + std::to_string(line_no) + ": " + why);
    };

    auto t = detail::trim(line);
    if (t.empty() || t.front() == '#') {
      if (end == text.size()) break;
      continue;
    }
    if (t.front() == '[') {
      auto close = t.find(']');
      if (close == std::string_view::npos) throw fail("unterminated section header");
      auto rest = detail::trim(t.substr(close + 1));
      if (!rest.empty() && rest.front() != '#') throw fail("unexpected text after section header");
      section = std::string(detail::trim(t.substr(1, close - 1)));
      if (!valid_name(section)) throw fail("invalid section name '" + section + "'");
      if (table.contains(section)) throw fail("duplicate section [" + section + "]");
      table[section];
    } else {
      auto eq = t.find('=');
      if (eq == std::string_view::npos) throw fail("expected 'key = value'");
      auto key = std::string(detail::trim(t.substr(0, eq)));
      if (!valid_name(key)) throw fail("invalid key '" + key + "'");
      TomlLineParser p(t.substr(eq + 1), source, line_no);
      auto value = p.value();
      p.expect_end();
      auto& keys = table[section];
      if (keys.contains(key)) throw fail("duplicate key '" + key + "'");
      keys.emplace(key, std::move(value));
    }
    if (end == text.size()) break;
  }
  return table;
}

// --- RunConfig ------------------------------------------------------------------

std::string_view to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::Mock: return "mock";
    case BackendKind::Http: return "http";
    case BackendKind::CachedHttp: return "cached:http";
    case BackendKind::CachedMock: return "cached:mock";
  }
  return "mock";
}

BackendKind backend_kind_from_string(std::string_view name) {
  for (auto k : {BackendKind::Mock, BackendKind::Http, BackendKind::CachedHttp, BackendKind::CachedMock}) {
    if (to_string(k) == name) return k;
  }
  throw Error(ErrorKind::Validation, "unknown backend '" + std::string(name) +
                                         "' (expected mock, http, cached:http or cached:mock)");
}

namespace {

class Reader {
 public:
  Reader(const TomlTable& table, std::string_view source) : table_(table), source_(source) {}

  // Rejects sections/keys that are not in the schema.
  void check_schema(const std::map<std::string, std::set<std::string>>& schema) const {
    for (const auto& [section, keys] : table_) {
      auto it = schema.find(section);
      if (it == schema.end()) {
        if (keys.empty()) continue;
        if (section.empty())
          fail(keys.begin()->second.line, "key '" + keys.begin()->first + "' must be inside a section");
        fail(keys.begin()->second.line, "unknown section [" + section + "]");
      }
      for (const auto& [key, value] : keys) {
        if (!it->second.contains(key)) fail(value.line, "unknown key '" + key + "' in [" + section + "]");
      }
    }
  }

  const TomlValue* find(const std::string& section, const std::string& key) const {
    auto s = table_.find(section);
    if (s == table_.end()) return nullptr;
    auto k = s->second.find(key);
    return k == s->second.end() ? nullptr : &k->second;
  }

  template <class T>
  void get(const std::string& section, const std::string& key, T& out) const {
    if (const auto* v = find(section, key)) out = convert<T>(*v, key);
  }

  template <class T>
  T convert(const TomlValue& v, const std::string& key) const {
    if constexpr (std::is_same_v<T, std::string>) {
      if (auto* s = std::get_if<std::string>(&v.v)) return *s;
      fail(v.line, "'" + key + "' must be a string");
    } else if constexpr (std::is_same_v<T, bool>) {
      if (auto* b = std::get_if<bool>(&v.v)) return *b;
      fail(v.line, "'" + key + "' must be true or false");
    } else if constexpr (std::is_same_v<T, double>) {
      if (auto* d = std::get_if<double>(&v.v)) return *d;
      if (auto* i = std::get_if<std::int64_t>(&v.v)) return static_cast<double>(*i);
      fail(v.line, "'" + key + "' must be a number");
    } else if constexpr (std::is_integral_v<T>) {
      if (auto* i = std::get_if<std::int64_t>(&v.v)) {
        if (*i < 0) fail(v.line, "'" + key + "' must not be negative");
        return static_cast<T>(*i);
      }
      fail(v.line, "'" + key + "' must be an integer");
    } else {
      static_assert(sizeof(T) == 0, "unsupported config type");
    }
  }

  [[noreturn]] void fail(std::size_t line, const std::string& why) const {
    throw Error(ErrorKind::Validation, std::string(source_) + ":" + std::to_string(line) + ": " + why);
  }

 private:
  const TomlTable& table_;
  std::string_view source_;
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return {};
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

std::string quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default: out += c;
    }
  }
  return out + "\"";
}

std::string num(double v) {
  char buf[64];
  for (int precision = 15; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  std::string s = buf;
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

}  // namespace

RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir,
                           std::string_view source) {
  auto table = parse_toml(text, source);
  Reader r(table, source);
  r.check_schema({
      {"dataset", {"path", "task", "limit"}},
      {"stream", {"batches", "budget", "seed", "update_after_final"}},
      {"strategy", {"kind", "xi", "demo_cap", "wrong_attempts", "wrong_temperature"}},
      {"backend", {"kind", "cache", "model", "max_tokens", "stop", "in_flight", "max_attempts",
                   "initial_backoff_ms"}},
      {"mock", {"correct_base", "shallow_bonus", "wrong_penalty", "xi", "depth_weights"}},
      {"output", {"path", "format", "audit", "timing"}},
  });

  RunConfig cfg;
  std::string s;
  if (const auto* v = r.find("dataset", "path")) cfg.dataset_path = resolve(base_dir, r.convert<std::string>(*v, "path"));
  if (const auto* v = r.find("dataset", "task")) cfg.task = task_from_string(r.convert<std::string>(*v, "task"));
  if (const auto* v = r.find("dataset", "limit")) cfg.limit = r.convert<std::size_t>(*v, "limit");

  r.get("stream", "batches", cfg.batches);
  r.get("stream", "budget", cfg.budget_tokens);
  r.get("stream", "seed", cfg.seed);
  r.get("stream", "update_after_final", cfg.update_after_final);

  if (const auto* v = r.find("strategy", "kind"))
    cfg.strategy.kind = strategy_from_string(r.convert<std::string>(*v, "kind"));
  r.get("strategy", "xi", cfg.strategy.xi);
  r.get("strategy", "demo_cap", cfg.strategy.demo_cap);
  r.get("strategy", "wrong_attempts", cfg.strategy.wrong_attempts);
  r.get("strategy", "wrong_temperature", cfg.strategy.wrong_temperature);

  if (const auto* v = r.find("backend", "kind"))
    cfg.backend = backend_kind_from_string(r.convert<std::string>(*v, "kind"));
  if (const auto* v = r.find("backend", "cache")) cfg.cache_path = resolve(base_dir, r.convert<std::string>(*v, "cache"));
  r.get("backend", "model", cfg.decoding.model_id);
  r.get("backend", "max_tokens", cfg.decoding.max_tokens);
  if (const auto* v = r.find("backend", "stop")) {
    auto* arr = std::get_if<TomlArray>(&v->v);
    if (arr == nullptr) r.fail(v->line, "'stop' must be an array of strings");
    cfg.decoding.stop.clear();
    for (const auto& item : *arr) cfg.decoding.stop.push_back(r.convert<std::string>(item, "stop"));
  }
  r.get("backend", "in_flight", cfg.in_flight);
  r.get("backend", "max_attempts", cfg.max_attempts);
  r.get("backend", "initial_backoff_ms", cfg.initial_backoff_ms);

  r.get("mock", "correct_base", cfg.mock.correct_base);
  r.get("mock", "shallow_bonus", cfg.mock.shallow_bonus);
  r.get("mock", "wrong_penalty", cfg.mock.wrong_penalty);
  r.get("mock", "xi", cfg.mock.shallow_xi);
  if (const auto* v = r.find("mock", "depth_weights")) {
    auto* arr = std::get_if<TomlArray>(&v->v);
    if (arr == nullptr) r.fail(v->line, "'depth_weights' must be an array of numbers");
    cfg.mock.depth_distribution.clear();
    for (std::size_t i = 0; i < arr->size(); ++i)
      cfg.mock.depth_distribution.push_back({i, r.convert<double>((*arr)[i], "depth_weights")});
  }

  if (const auto* v = r.find("output", "path")) cfg.out_path = resolve(base_dir, r.convert<std::string>(*v, "path"));
  if (const auto* v = r.find("output", "format"))
    cfg.format = report_format_from_string(r.convert<std::string>(*v, "format"));
  if (const auto* v = r.find("output", "audit")) cfg.audit_path = resolve(base_dir, r.convert<std::string>(*v, "audit"));
  r.get("output", "timing", cfg.timing);
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Validation, "cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), path.parent_path(), path.string());
}

void validate(const RunConfig& cfg) {
  auto fail = [](const std::string& why) { throw Error(ErrorKind::Validation, why); };
  if (cfg.dataset_path.empty()) fail("no dataset: set [dataset] path or pass --dataset");
  if (!std::filesystem::exists(cfg.dataset_path))
    fail("dataset file " + cfg.dataset_path.string() + " does not exist");
  if (!cfg.task) fail("no task kind: set [dataset] task or pass --task (arithmetic, yesno, symbolic)");
  if (cfg.limit && *cfg.limit == 0) fail("limit must be positive");
  if (cfg.batches < 1) fail("batches must be at least 1");
  if (cfg.budget_tokens < 1) fail("budget must be positive");
  cfg.strategy.validate();
  if (cfg.decoding.max_tokens < 1) fail("max_tokens must be positive");
  if (cfg.decoding.stop.size() > 4) fail("at most 4 stop sequences are allowed");
  if (cfg.in_flight < 1) fail("in_flight must be at least 1");
  const bool cached = cfg.backend == BackendKind::CachedHttp || cfg.backend == BackendKind::CachedMock;
  if (cached && cfg.cache_path.empty())
    fail("backend " + std::string(to_string(cfg.backend)) + " needs a cache file: set [backend] cache or pass --cache");
  if (cfg.backend == BackendKind::Http || cfg.backend == BackendKind::CachedHttp) (void)HttpConfig::from_env();
  if (cfg.mock.shallow_xi < 1) fail("mock xi must be at least 1");
  if (cfg.mock.depth_distribution.empty()) fail("mock depth_weights must not be empty");
}

std::string to_toml(const RunConfig& cfg) {
  std::ostringstream os;
  os << "[dataset]\n";
  os << "path = " << quote(cfg.dataset_path.string()) << "\n";
  if (cfg.task) os << "task = " << quote(to_string(*cfg.task)) << "\n";
  if (cfg.limit) os << "limit = " << *cfg.limit << "\n";
  os << "\n[stream]\n";
  os << "batches = " << cfg.batches << "\n";
  os << "budget = " << cfg.budget_tokens << "\n";
  os << "seed = " << cfg.seed << "\n";
  os << "update_after_final = " << (cfg.update_after_final ? "true" : "false") << "\n";
  os << "\n[strategy]\n";
  os << "kind = " << quote(to_string(cfg.strategy.kind)) << "\n";
  os << "xi = " << cfg.strategy.xi << "\n";
  os << "demo_cap = " << cfg.strategy.demo_cap << "\n";
  os << "wrong_attempts = " << cfg.strategy.wrong_attempts << "\n";
  os << "wrong_temperature = " << num(cfg.strategy.wrong_temperature) << "\n";
  os << "\n[backend]\n";
  os << "kind = " << quote(to_string(cfg.backend)) << "\n";
  if (!cfg.cache_path.empty()) os << "cache = " << quote(cfg.cache_path.string()) << "\n";
  os << "model = " << quote(cfg.decoding.model_id) << "\n";
  os << "max_tokens = " << cfg.decoding.max_tokens << "\n";
  os << "stop = [";
  for (std::size_t i = 0; i < cfg.decoding.stop.size(); ++i)
    os << (i ? ", " : "") << quote(cfg.decoding.stop[i]);
  os << "]\n";
  os << "in_flight = " << cfg.in_flight << "\n";
  os << "max_attempts = " << cfg.max_attempts << "\n";
  os << "initial_backoff_ms = " << cfg.initial_backoff_ms << "\n";
  os << "\n[mock]\n";
  os << "correct_base = " << num(cfg.mock.correct_base) << "\n";
  os << "shallow_bonus = " << num(cfg.mock.shallow_bonus) << "\n";
  os << "wrong_penalty = " << num(cfg.mock.wrong_penalty) << "\n";
  os << "xi = " << cfg.mock.shallow_xi << "\n";
  // depth_weights is positional: entry i is the weight of i newlines.
  std::size_t max_depth = 0;
  for (const auto& w : cfg.mock.depth_distribution) max_depth = std::max(max_depth, w.newline_count);
  std::vector<double> weights(max_depth + 1, 0.0);
  for (const auto& w : cfg.mock.depth_distribution) weights[w.newline_count] += w.weight;
  os << "depth_weights = [";
  for (std::size_t i = 0; i < weights.size(); ++i) os << (i ? ", " : "") << num(weights[i]);
  os << "]\n";
  os << "\n[output]\n";
  if (!cfg.out_path.empty()) os << "path = " << quote(cfg.out_path.string()) << "\n";
  os << "format = " << quote(cfg.format == ReportFormat::Csv ? "csv" : "json") << "\n";
  if (!cfg.audit_path.empty()) os << "audit = " << quote(cfg.audit_path.string()) << "\n";
  os << "timing = " << (cfg.timing ? "true" : "false") << "\n";
  return os.str();
}

json config_snapshot(const RunConfig& cfg) {
  json j;
  j["dataset"] = {{"path", cfg.dataset_path.string()},
                  {"task", cfg.task ? json(to_string(*cfg.task)) : json()},
                  {"limit", cfg.limit ? json(*cfg.limit) : json()}};
  j["stream"] = {{"batches", cfg.batches},
                 {"budget", cfg.budget_tokens},
                 {"seed", cfg.seed},
                 {"update_after_final", cfg.update_after_final}};
  j["strategy"] = cfg.strategy;
  j["backend"] = {{"kind", to_string(cfg.backend)},
                  {"cache", cfg.cache_path.string()},
                  {"decoding", cfg.decoding},
                  {"in_flight", cfg.in_flight},
                  {"max_attempts", cfg.max_attempts},
                  {"initial_backoff_ms", cfg.initial_backoff_ms}};
  if (cfg.backend == BackendKind::Mock || cfg.backend == BackendKind::CachedMock) {
    auto mock = cfg.mock;
    mock.seed = cfg.seed;
    j["mock"] = mock;
  }
  return j;
}

std::string config_hash(const RunConfig& cfg) { return sha256_hex(config_snapshot(cfg).dump()); }

std::shared_ptr<Backend> make_backend(const RunConfig& cfg, const Dataset& dataset) {
  auto mock = [&] {
    auto script = cfg.mock;
    script.seed = cfg.seed;
    return std::make_shared<MockBackend>(script, AnswerKey(dataset));
  };
  auto http = [&] {
    auto h = HttpConfig::from_env();
    h.in_flight = cfg.in_flight;
    h.max_attempts = cfg.max_attempts;
    h.initial_backoff = std::chrono::milliseconds(cfg.initial_backoff_ms);
    return std::make_shared<HttpBackend>(h);
  };
  switch (cfg.backend) {
    case BackendKind::Mock: return mock();
    case BackendKind::Http: return http();
    case BackendKind::CachedHttp: return std::make_shared<CachedBackend>(http(), cfg.cache_path);
    case BackendKind::CachedMock: return std::make_shared<CachedBackend>(mock(), cfg.cache_path);
  }
  return mock();
}

}  // namespace cotstream
