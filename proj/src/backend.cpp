#include <json.hpp>

#include "cotstream/backend.hpp"
#include "cotstream/error.hpp"
#include "cotstream/hash.hpp"
#include "cotstream/json_io.hpp"
#include "cotstream/prompting.hpp"

namespace cotstream {

using nlohmann::json;

std::string_view to_string(FinishReason reason) {
  switch (reason) {
    case FinishReason::Stop: return "stop";
    case FinishReason::Length: return "length";
    case FinishReason::Error: return "error";
  }
  return "error";
}

FinishReason finish_reason_from_string(std::string_view name) {
  if (name == "stop") return FinishReason::Stop;
  if (name == "length") return FinishReason::Length;
  if (name == "error") return FinishReason::Error;
  throw Error(ErrorKind::Parse, "unknown finish_reason '" + std::string(name) + "'");
}

std::string canonical_request_json(const CompletionRequest& request) {
  return json(request).dump();
}

std::string cache_key(const CompletionRequest& request) {
  return sha256_hex(canonical_request_json(request));
}

// ---------------------------------------------------------------------------

CachedBackend::CachedBackend(std::shared_ptr<Backend> inner, std::filesystem::path path)
    : inner_(std::move(inner)), path_(std::move(path)) {
  if (!inner_) throw Error(ErrorKind::Validation, "cache wrapper needs an inner backend");
  if (std::filesystem::exists(path_)) {
    std::ifstream in(path_);
    if (!in) throw Error(ErrorKind::Io, "cannot read cache " + path_.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      try {
        auto rec = json::parse(line);
        auto key = rec.at("key").get<std::string>();
        auto request = rec.at("request").get<CompletionRequest>();
        if (cache_key(request) != key) throw Error(ErrorKind::Parse, "key does not match request");
        store_[key].push_back(rec.at("response").get<CompletionResponse>());
      } catch (const std::exception& e) {
        throw Error(ErrorKind::Parse, "corrupt cache " + path_.string() + ":" +
                                          std::to_string(line_no) + ": " + e.what());
      }
    }
  }
  out_.open(path_, std::ios::app);
  if (!out_) throw Error(ErrorKind::Io, "cannot open cache " + path_.string() + " for append");
}

std::string CachedBackend::identity() const { return "cached:" + inner_->identity(); }

CompletionResponse CachedBackend::complete(const CompletionRequest& request) {
  const auto key = cache_key(request);
  {
    std::lock_guard lock(mu_);
    auto it = store_.find(key);
    if (request.temperature == 0.0) {
      if (it != store_.end() && !it->second.empty()) {
        ++hits_;
        return it->second.front();
      }
    } else {
      auto idx = cursor_[key]++;
      if (it != store_.end() && idx < it->second.size()) {
        ++hits_;
        return it->second[idx];
      }
    }
  }

  ++inner_calls_;
  auto response = inner_->complete(request);

  json rec;
  rec["key"] = key;
  rec["request"] = request;
  rec["response"] = response;
  std::lock_guard lock(mu_);
  store_[key].push_back(response);
  out_ << rec.dump() << '\n';
  out_.flush();
  if (!out_) throw Error(ErrorKind::Io, "failed to append to cache " + path_.string());
  return response;
}

// ---------------------------------------------------------------------------

ZeroShotResult zero_shot_cot(const Sample& sample, Backend& backend, double temperature,
                             const DecodingParams& decoding) {
  CompletionRequest req;
  req.prompt = render_prompt(Prompt{}, sample.question);
  req.max_tokens = decoding.max_tokens;
  req.temperature = temperature;
  req.stop = decoding.stop;
  req.model_id = decoding.model_id;
  auto stage1 = backend.complete(req);

  Origin origin = temperature > 0.0 ? Origin{OriginKind::Sampled, temperature}
                                    : Origin{OriginKind::ZeroShotGreedy, 0.0};
  ZeroShotResult result;
  result.rationale = make_rationale(stage1.text, origin);
  result.empty_rationale = result.rationale.text.empty();

  req.prompt += stage1.text;
  req.prompt += kAnswerTrigger;
  result.answer_completion = backend.complete(req).text;
  return result;
}

}  // namespace cotstream
