#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "spider/templ/modality.hpp"

namespace spider::templ {

enum class Signal : std::uint8_t { Input, Out, End };

std::string_view signal_token(Signal s) noexcept;

enum class TokenKind : std::uint8_t {
  Signal,      // [INPUT] [OUT] [END]
  TaskPrompt,  // [TEXT] ... [SPECIFICMULTIMODAL]
  BeginTag,    // <IMAGE>
  EndTag,      // </IMAGE>
  MPrompt,     // [IMAGE_0]
  Text,        // anything else, including unrecognized bracket sequences
};

std::string_view token_kind_name(TokenKind k) noexcept;

struct Token {
  TokenKind kind = TokenKind::Text;
  /// Slice of the tokenized input; valid while the input is alive.
  std::string_view lexeme;
  std::size_t offset = 0;
  Signal signal = Signal::Input;
  TaskPrompt task = TaskPrompt::Text;
  Modality modality = Modality::Image;
  std::uint64_t index = 0;  // M-Prompt index i in [X_i]

  [[nodiscard]] bool is_blank_text() const noexcept;
};

/// Splits a template string into structural tokens and text runs.
///
/// Total: never fails. Structural tokens are matched greedily at every '['
/// and '<'; anything that does not match extends the current text run, so
/// adjacent unrecognized characters merge into one Text token. The lexemes
/// concatenate back to the input exactly.
std::vector<Token> tokenize(std::string_view input);

/// Trims ASCII whitespace and collapses interior runs to a single space.
std::string normalize_whitespace(std::string_view s);

}  // namespace spider::templ
