#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "spider/templ/messages.hpp"
#include "spider/templ/tokens.hpp"

namespace spider::templ {

/// Raised by the serializers when a message violates its invariants.
class SerializeError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Parses an input question. Free text is whitespace-normalized; the
/// optional "<X>{asset:ref}</X>" wrapper may appear anywhere after the task
/// prompt. Other tags and M-Prompts inside the instruction (an answer-format
/// skeleton) are kept verbatim as instruction text but must be balanced.
Parsed<QuestionMessage> parse_question(std::string_view input);

/// Canonical form "[INPUT] [TASK] <X>{asset:ref}</X> instruction".
/// Throws SerializeError when the instruction itself contains an asset
/// wrapper, a signal, or a task prompt.
std::string serialize_question(const QuestionMessage& q);

/// Parses a TXs answer. Text before a group is that group's text_response,
/// text after the last group is tail_text; inside a group the text before the
/// M-Prompt is the t_prompt. Exactly one M-Prompt per group.
Parsed<AnswerMessage> parse_answer(std::string_view input);

/// Canonical single-spaced rendering. Throws SerializeError on an empty
/// t_prompt or on free text that would tokenize into structural tokens.
std::string serialize_answer(const AnswerMessage& a);

/// Renders only the group sequence "<X> T [X_i] </X> ..." without signals or
/// text responses; used to embed an answer-format skeleton in a question.
std::string serialize_group_skeleton(const std::vector<ModalityGroup>& groups);

/// Empty when the answer is admissible for the task, else one message per
/// violation.
std::vector<std::string> validate_answer_against_task(TaskPrompt task, const AnswerMessage& a);

/// Modalities of the answer's groups, in order.
std::vector<Modality> group_modalities(const AnswerMessage& a);

}  // namespace spider::templ
