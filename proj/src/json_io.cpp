#include "cotstream/json_io.hpp"

namespace cotstream {

using nlohmann::json;

void to_json(json& j, const Origin& v) {
  j = json{{"kind", to_string(v.kind)}};
  if (v.kind == OriginKind::Sampled) j["temperature"] = v.temperature;
}

void from_json(const json& j, Origin& v) {
  v.kind = origin_kind_from_string(j.at("kind").get<std::string>());
  v.temperature = j.value("temperature", 0.0);
}

void to_json(json& j, const Rationale& v) {
  j = json{{"text", v.text},
           {"newline_count", v.newline_count},
           {"steps", v.steps},
           {"token_estimate", v.token_estimate},
           {"origin", v.origin}};
}

void from_json(const json& j, Rationale& v) {
  j.at("text").get_to(v.text);
  j.at("newline_count").get_to(v.newline_count);
  j.at("steps").get_to(v.steps);
  j.at("token_estimate").get_to(v.token_estimate);
  j.at("origin").get_to(v.origin);
}

void to_json(json& j, const Verdict& v) {
  j = json{{"correct", v.correct}, {"predicted", v.predicted}};
}

void from_json(const json& j, Verdict& v) {
  j.at("correct").get_to(v.correct);
  j.at("predicted").get_to(v.predicted);
}

void to_json(json& j, const Demonstration& v) {
  j = json{{"sample_id", v.sample_id},     {"question", v.question},
           {"rationale", v.rationale},     {"answer_text", v.answer_text},
           {"verdict", v.verdict},         {"batch_of_origin", v.batch_of_origin}};
}

void from_json(const json& j, Demonstration& v) {
  j.at("sample_id").get_to(v.sample_id);
  j.at("question").get_to(v.question);
  j.at("rationale").get_to(v.rationale);
  j.at("answer_text").get_to(v.answer_text);
  j.at("verdict").get_to(v.verdict);
  j.at("batch_of_origin").get_to(v.batch_of_origin);
}

void to_json(json& j, const Prompt& v) {
  j = json{{"demos", v.demos}, {"budget_tokens", v.budget_tokens}, {"template", v.template_id}};
}

void from_json(const json& j, Prompt& v) {
  j.at("demos").get_to(v.demos);
  j.at("budget_tokens").get_to(v.budget_tokens);
  j.at("template").get_to(v.template_id);
}

void to_json(json& j, const PromptStats& v) {
  j = json{{"n_demos", v.n_demos},
           {"wrong_fraction", v.wrong_fraction},
           {"mean_newline_depth", v.mean_newline_depth},
           {"token_total", v.token_total}};
}

void from_json(const json& j, PromptStats& v) {
  j.at("n_demos").get_to(v.n_demos);
  j.at("wrong_fraction").get_to(v.wrong_fraction);
  j.at("mean_newline_depth").get_to(v.mean_newline_depth);
  j.at("token_total").get_to(v.token_total);
}

// Field names follow the completions API so the cached request reads naturally.
void to_json(json& j, const CompletionRequest& v) {
  j = json{{"model", v.model_id},
           {"prompt", v.prompt},
           {"max_tokens", v.max_tokens},
           {"temperature", v.temperature},
           {"stop", v.stop}};
}

void from_json(const json& j, CompletionRequest& v) {
  j.at("model").get_to(v.model_id);
  j.at("prompt").get_to(v.prompt);
  j.at("max_tokens").get_to(v.max_tokens);
  j.at("temperature").get_to(v.temperature);
  j.at("stop").get_to(v.stop);
}

void to_json(json& j, const CompletionResponse& v) {
  j = json{{"text", v.text},
           {"finish_reason", to_string(v.finish_reason)},
           {"prompt_tokens", v.prompt_tokens},
           {"completion_tokens", v.completion_tokens}};
}

void from_json(const json& j, CompletionResponse& v) {
  j.at("text").get_to(v.text);
  v.finish_reason = finish_reason_from_string(j.at("finish_reason").get<std::string>());
  j.at("prompt_tokens").get_to(v.prompt_tokens);
  j.at("completion_tokens").get_to(v.completion_tokens);
}

void to_json(json& j, const DecodingParams& v) {
  j = json{{"model", v.model_id}, {"max_tokens", v.max_tokens}, {"stop", v.stop}};
}

void from_json(const json& j, DecodingParams& v) {
  j.at("model").get_to(v.model_id);
  j.at("max_tokens").get_to(v.max_tokens);
  j.at("stop").get_to(v.stop);
}

void to_json(json& j, const StrategyConfig& v) {
  j = json{{"kind", to_string(v.kind)},
           {"xi", v.xi},
           {"demo_cap", v.demo_cap},
           {"wrong_attempts", v.wrong_attempts},
           {"wrong_temperature", v.wrong_temperature}};
}

void from_json(const json& j, StrategyConfig& v) {
  v.kind = strategy_from_string(j.at("kind").get<std::string>());
  j.at("xi").get_to(v.xi);
  j.at("demo_cap").get_to(v.demo_cap);
  j.at("wrong_attempts").get_to(v.wrong_attempts);
  j.at("wrong_temperature").get_to(v.wrong_temperature);
}

void to_json(json& j, const MockScript& v) {
  json depths = json::array();
  for (const auto& d : v.depth_distribution) depths.push_back({d.newline_count, d.weight});
  j = json{{"seed", v.seed},
           {"correct_base", v.correct_base},
           {"shallow_bonus", v.shallow_bonus},
           {"wrong_penalty", v.wrong_penalty},
           {"xi", v.shallow_xi},
           {"depth_distribution", depths}};
}

void from_json(const json& j, MockScript& v) {
  j.at("seed").get_to(v.seed);
  j.at("correct_base").get_to(v.correct_base);
  j.at("shallow_bonus").get_to(v.shallow_bonus);
  j.at("wrong_penalty").get_to(v.wrong_penalty);
  j.at("xi").get_to(v.shallow_xi);
  v.depth_distribution.clear();
  for (const auto& d : j.at("depth_distribution"))
    v.depth_distribution.push_back({d.at(0).get<std::size_t>(), d.at(1).get<double>()});
}

}  // namespace cotstream
