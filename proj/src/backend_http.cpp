#include <httplib.h>

#include <cstdlib>
#include <thread>

#include <json.hpp>

#include "cotstream/backend.hpp"
#include "cotstream/error.hpp"
#include "cotstream/rationale.hpp"

namespace cotstream {

using nlohmann::json;

namespace {

bool retryable(int status) { return status == 429 || status >= 500; }

// RAII slot in the in-flight limiter.
class Slot {
 public:
  explicit Slot(std::counting_semaphore<256>& sem) : sem_(sem) { sem_.acquire(); }
  ~Slot() { sem_.release(); }
  Slot(const Slot&) = delete;
  Slot& operator=(const Slot&) = delete;

 private:
  std::counting_semaphore<256>& sem_;
};

}  // namespace

HttpConfig HttpConfig::from_env() {
  HttpConfig cfg;
  const char* key = std::getenv("COTSTREAM_API_KEY");
  const char* url = std::getenv("COTSTREAM_BASE_URL");
  if (key == nullptr || *key == '\0')
    throw Error(ErrorKind::Validation, "http backend needs COTSTREAM_API_KEY in the environment");
  if (url == nullptr || *url == '\0')
    throw Error(ErrorKind::Validation, "http backend needs COTSTREAM_BASE_URL in the environment");
  cfg.api_key = key;
  cfg.base_url = url;
  return cfg;
}

HttpBackend::HttpBackend(HttpConfig config)
    : config_(std::move(config)),
      slots_(static_cast<std::ptrdiff_t>(std::clamp<std::size_t>(config_.in_flight, 1, 256))) {
  if (config_.max_attempts == 0) config_.max_attempts = 1;
  auto scheme = config_.base_url.find("://");
  if (scheme == std::string::npos)
    throw Error(ErrorKind::Validation, "base URL '" + config_.base_url + "' has no scheme");
  auto slash = config_.base_url.find('/', scheme + 3);
  origin_ = config_.base_url.substr(0, slash);
  if (slash != std::string::npos) path_prefix_ = config_.base_url.substr(slash);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
}

std::string HttpBackend::identity() const { return "http:" + config_.base_url; }

CompletionResponse parse_completion_body(std::string_view body, const CompletionRequest& request) {
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Backend, std::string("malformed completion response: ") + e.what());
  }
  if (!doc.contains("choices") || !doc["choices"].is_array() || doc["choices"].empty() ||
      !doc["choices"][0].contains("text") || !doc["choices"][0]["text"].is_string()) {
    throw Error(ErrorKind::Backend, "completion response lacks choices[0].text");
  }
  CompletionResponse r;
  const auto& choice = doc["choices"][0];
  r.text = choice["text"].get<std::string>();
  if (choice.contains("finish_reason") && choice["finish_reason"].is_string())
    r.finish_reason = choice["finish_reason"] == "length" ? FinishReason::Length : FinishReason::Stop;
  if (doc.contains("usage") && doc["usage"].is_object()) {
    const auto& usage = doc["usage"];
    r.prompt_tokens = usage.value("prompt_tokens", std::size_t{0});
    r.completion_tokens = usage.value("completion_tokens", std::size_t{0});
  } else {
    r.prompt_tokens = estimate_tokens(request.prompt);
    r.completion_tokens = estimate_tokens(r.text);
  }
  return r;
}

CompletionResponse HttpBackend::complete(const CompletionRequest& request) {
  json body;
  body["model"] = request.model_id;
  body["prompt"] = request.prompt;
  body["max_tokens"] = request.max_tokens;
  body["temperature"] = request.temperature;
  body["stop"] = request.stop;
  const auto payload = body.dump();
  const auto path = path_prefix_ + "/v1/completions";

  Slot slot(slots_);
  auto backoff = config_.initial_backoff;
  std::string last_error;
  for (std::size_t attempt = 1; attempt <= config_.max_attempts; ++attempt) {
    httplib::Client client(origin_);
    client.set_connection_timeout(config_.timeout);
    client.set_read_timeout(config_.timeout);
    client.set_bearer_token_auth(config_.api_key);
    auto res = client.Post(path, payload, "application/json");
    if (!res) {
      last_error = "request to " + origin_ + path + " failed: " + httplib::to_string(res.error());
    } else if (res->status >= 200 && res->status < 300) {
      return parse_completion_body(res->body, request);
    } else if (!retryable(res->status)) {
      throw Error(ErrorKind::Backend,
                  "HTTP " + std::to_string(res->status) + " from " + origin_ + path + ": " + res->body);
    } else {
      last_error = "HTTP " + std::to_string(res->status) + ": " + res->body;
    }
    if (attempt < config_.max_attempts) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
  }
  throw Error(ErrorKind::Backend, "giving up after " + std::to_string(config_.max_attempts) +
                                      " attempts: " + last_error);
}

}  // namespace cotstream
