#pragma once

#include <json.hpp>
#include "spider/templ/messages.hpp"

namespace spider::templ {

// JSON renderings use the message field names; enums are rendered by their
// upper-case names ("IMAGE", "SMARTMULTIMODAL").
nlohmann::json to_json(const QuestionMessage& q);
nlohmann::json to_json(const ModalityGroup& g);
nlohmann::json to_json(const AnswerMessage& a);
nlohmann::json to_json(const ParseError& e);

/// Inverse of to_json(AnswerMessage); throws nlohmann::json::exception or
/// std::invalid_argument on malformed input.
AnswerMessage answer_from_json(const nlohmann::json& j);
QuestionMessage question_from_json(const nlohmann::json& j);

Modality modality_from_json(const nlohmann::json& j);

}  // namespace spider::templ
