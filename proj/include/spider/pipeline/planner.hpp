#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "spider/templ/messages.hpp"

namespace spider::pipeline {

using templ::AnswerMessage;
using templ::Modality;
using templ::QuestionMessage;
using templ::TaskPrompt;

/// One instruction pattern with a single "{}" placeholder.
///
/// The placeholder content becomes the T-Prompt of every target group (via
/// `t_prompt_formats`, "{}" by default) and the leading answer text (via
/// `lead_format`). For [TEXT] tasks the answer is `lead_format` as tail text.
/// With `content_is_skeleton` the placeholder holds an answer-format skeleton
/// whose groups the answer must reproduce.
struct InstructionTemplate {
  std::string pattern;
  TaskPrompt task_prompt = TaskPrompt::Text;
  std::vector<Modality> target_modalities;
  std::optional<Modality> requires_input_modality;
  std::vector<std::string> t_prompt_formats;
  std::string lead_format = "{}.";
  bool content_is_skeleton = false;

  /// Throws std::invalid_argument when the placeholder count is not one, the
  /// target list is inconsistent with the task, or formats are malformed.
  void validate() const;
  [[nodiscard]] std::string instantiate(std::string_view content) const;
  /// Content recovered from an instruction, when the instruction fits.
  [[nodiscard]] std::optional<std::string> match(std::string_view instruction) const;
};

/// Instruction listing several requests: lead + segment_1 + separator + ...
/// Each segment comes from a per-modality phrase with one "{}".
struct MultiRequestTemplate {
  std::string lead;
  std::string separator = "; ";
  TaskPrompt task_prompt = TaskPrompt::SmartMultimodal;
  std::vector<std::pair<Modality, std::string>> segment_patterns;

  void validate() const;
  [[nodiscard]] std::string instantiate(const std::vector<std::pair<Modality, std::string>>& requests) const;
  [[nodiscard]] std::optional<std::vector<std::pair<Modality, std::string>>> match(std::string_view instruction) const;
};

/// Replaces every "{}" in `format` with `content`.
std::string fill(std::string_view format, std::string_view content);

/// Answer construction rule shared by the forge and the planner: the first
/// group carries the lead text, later groups carry ".", each group's T-Prompt
/// comes from its format, and [TEXT] answers put the lead text in the tail.
AnswerMessage construct_answer(const InstructionTemplate& t, std::string_view content);

/// Answer for a list of (modality, caption) requests: group i has text
/// "caption_i." and T-Prompt caption_i.
AnswerMessage construct_multi_answer(const std::vector<std::pair<Modality, std::string>>& requests);

class UnmatchedInstruction : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Rule-based stand-in for the finetuned LLM: inverts registered instruction
/// patterns to recover the target modalities and content text.
class Planner {
 public:
  Planner() = default;
  Planner(std::vector<InstructionTemplate> templates, std::vector<MultiRequestTemplate> multi);

  void add(InstructionTemplate t);
  void add(MultiRequestTemplate t);

  /// Throws UnmatchedInstruction when no registered pattern fits the
  /// question's task prompt, input modality and instruction.
  [[nodiscard]] AnswerMessage plan_answer(const QuestionMessage& q) const;

  [[nodiscard]] std::size_t size() const noexcept { return templates_.size() + multi_.size(); }

 private:
  std::vector<InstructionTemplate> templates_;
  std::vector<MultiRequestTemplate> multi_;
};

}  // namespace spider::pipeline
