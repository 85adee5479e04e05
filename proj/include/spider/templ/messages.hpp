#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "spider/templ/modality.hpp"

namespace spider::templ {

struct InputAsset {
  Modality modality = Modality::Image;
  std::string asset_ref;

  friend bool operator==(const InputAsset&, const InputAsset&) = default;
};

/// "[INPUT] [Task] <X>{asset:ref}</X> instruction"
struct QuestionMessage {
  TaskPrompt task_prompt = TaskPrompt::Text;
  std::optional<InputAsset> input_asset;
  std::string instruction;

  friend bool operator==(const QuestionMessage&, const QuestionMessage&) = default;
};

/// One "T_i <X> T^X [X_i] </X>" unit of an answer.
struct ModalityGroup {
  std::string text_response;
  Modality modality = Modality::Image;
  std::string t_prompt;
  std::uint64_t m_prompt_index = 0;

  friend bool operator==(const ModalityGroup&, const ModalityGroup&) = default;
};

/// "[OUT] groups... tail [END]"
struct AnswerMessage {
  std::vector<ModalityGroup> groups;
  std::string tail_text;

  friend bool operator==(const AnswerMessage&, const AnswerMessage&) = default;
};

enum class ParseErrorKind : std::uint8_t {
  UnknownToken,
  UnbalancedTag,
  TagMismatch,
  MissingStartSignal,
  MissingEndSignal,
  MPromptOutsideGroup,
  MPromptModalityMismatch,
  DuplicateInputAsset,
};

std::string_view parse_error_kind_name(ParseErrorKind k) noexcept;

struct ParseError {
  ParseErrorKind kind = ParseErrorKind::UnknownToken;
  /// Byte offset into the input; always < input length for non-empty input.
  std::size_t position = 0;
  /// Excerpt of the input around `position`.
  std::string context;
  std::string message;

  [[nodiscard]] std::string describe() const;
};

/// Either a parsed value or the first error encountered.
template <typename T>
class Parsed {
 public:
  Parsed(T value) : state_(std::move(value)) {}            // NOLINT(google-explicit-constructor)
  Parsed(ParseError error) : state_(std::move(error)) {}   // NOLINT(google-explicit-constructor)

  [[nodiscard]] bool ok() const noexcept { return std::holds_alternative<T>(state_); }
  explicit operator bool() const noexcept { return ok(); }
  [[nodiscard]] const T& value() const& { return std::get<T>(state_); }
  [[nodiscard]] T&& value() && { return std::get<T>(std::move(state_)); }
  [[nodiscard]] const ParseError& error() const& { return std::get<ParseError>(state_); }

 private:
  std::variant<T, ParseError> state_;
};

}  // namespace spider::templ
