#pragma once

#include <json.hpp>

#include "cotstream/backend.hpp"
#include "cotstream/prompting.hpp"
#include "cotstream/rationale.hpp"
#include "cotstream/strategies.hpp"

namespace cotstream {

void to_json(nlohmann::json& j, const Origin& v);
void from_json(const nlohmann::json& j, Origin& v);
void to_json(nlohmann::json& j, const Rationale& v);
void from_json(const nlohmann::json& j, Rationale& v);
void to_json(nlohmann::json& j, const Verdict& v);
void from_json(const nlohmann::json& j, Verdict& v);
void to_json(nlohmann::json& j, const Demonstration& v);
void from_json(const nlohmann::json& j, Demonstration& v);
void to_json(nlohmann::json& j, const Prompt& v);
void from_json(const nlohmann::json& j, Prompt& v);
void to_json(nlohmann::json& j, const PromptStats& v);
void from_json(const nlohmann::json& j, PromptStats& v);
void to_json(nlohmann::json& j, const CompletionRequest& v);
void from_json(const nlohmann::json& j, CompletionRequest& v);
void to_json(nlohmann::json& j, const CompletionResponse& v);
void from_json(const nlohmann::json& j, CompletionResponse& v);
void to_json(nlohmann::json& j, const DecodingParams& v);
void from_json(const nlohmann::json& j, DecodingParams& v);
void to_json(nlohmann::json& j, const StrategyConfig& v);
void from_json(const nlohmann::json& j, StrategyConfig& v);
void to_json(nlohmann::json& j, const MockScript& v);
void from_json(const nlohmann::json& j, MockScript& v);

}  // namespace cotstream
