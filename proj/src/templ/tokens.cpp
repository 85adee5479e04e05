#include "spider/templ/tokens.hpp"

#include <optional>

namespace spider::templ {

namespace {

// Longest index we accept inside [X_i]; longer digit strings stay text.
constexpr std::size_t kMaxIndexDigits = 9;
// No structural token is longer than this; bounds the closing-bracket scan.
constexpr std::size_t kMaxTokenLength = 32;

bool is_space(char c) noexcept {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::optional<Token> match_bracket(std::string_view rest) {
  const std::size_t close = rest.substr(0, kMaxTokenLength).find(']');
  if (close == std::string_view::npos) return std::nullopt;
  const std::string_view body = rest.substr(1, close - 1);
  const std::string_view lexeme = rest.substr(0, close + 1);

  Token tok;
  tok.lexeme = lexeme;
  for (Signal s : {Signal::Input, Signal::Out, Signal::End}) {
    if (signal_token(s) == lexeme) {
      tok.kind = TokenKind::Signal;
      tok.signal = s;
      return tok;
    }
  }
  if (auto task = parse_task_prompt_name(body)) {
    tok.kind = TokenKind::TaskPrompt;
    tok.task = *task;
    return tok;
  }
  const std::size_t underscore = body.rfind('_');
  if (underscore == std::string_view::npos) return std::nullopt;
  const auto modality = parse_modality(body.substr(0, underscore));
  const std::string_view digits = body.substr(underscore + 1);
  if (!modality || digits.empty() || digits.size() > kMaxIndexDigits) return std::nullopt;
  std::uint64_t index = 0;
  for (char c : digits) {
    if (c < '0' || c > '9') return std::nullopt;
    index = index * 10 + static_cast<std::uint64_t>(c - '0');
  }
  tok.kind = TokenKind::MPrompt;
  tok.modality = *modality;
  tok.index = index;
  return tok;
}

std::optional<Token> match_angle(std::string_view rest) {
  const std::size_t close = rest.substr(0, kMaxTokenLength).find('>');
  if (close == std::string_view::npos) return std::nullopt;
  std::string_view body = rest.substr(1, close - 1);
  Token tok;
  tok.lexeme = rest.substr(0, close + 1);
  tok.kind = TokenKind::BeginTag;
  if (!body.empty() && body.front() == '/') {
    tok.kind = TokenKind::EndTag;
    body.remove_prefix(1);
  }
  const auto modality = parse_modality(body);
  if (!modality) return std::nullopt;
  tok.modality = *modality;
  return tok;
}

}  // namespace

std::string_view signal_token(Signal s) noexcept {
  switch (s) {
    case Signal::Input: return "[INPUT]";
    case Signal::Out: return "[OUT]";
    case Signal::End: return "[END]";
  }
  return "";
}

std::string_view token_kind_name(TokenKind k) noexcept {
  switch (k) {
    case TokenKind::Signal: return "Signal";
    case TokenKind::TaskPrompt: return "TaskPrompt";
    case TokenKind::BeginTag: return "BeginTag";
    case TokenKind::EndTag: return "EndTag";
    case TokenKind::MPrompt: return "MPrompt";
    case TokenKind::Text: return "Text";
  }
  return "";
}

bool Token::is_blank_text() const noexcept {
  if (kind != TokenKind::Text) return false;
  for (char c : lexeme)
    if (!is_space(c)) return false;
  return true;
}

std::vector<Token> tokenize(std::string_view input) {
  std::vector<Token> tokens;
  std::size_t text_start = 0;
  std::size_t pos = 0;

  auto flush_text = [&](std::size_t end) {
    if (end > text_start) {
      Token t;
      t.kind = TokenKind::Text;
      t.lexeme = input.substr(text_start, end - text_start);
      t.offset = text_start;
      tokens.push_back(t);
    }
  };

  while (pos < input.size()) {
    std::optional<Token> matched;
    if (input[pos] == '[') {
      matched = match_bracket(input.substr(pos));
    } else if (input[pos] == '<') {
      matched = match_angle(input.substr(pos));
    }
    if (!matched) {
      ++pos;
      continue;
    }
    flush_text(pos);
    matched->offset = pos;
    pos += matched->lexeme.size();
    text_start = pos;
    tokens.push_back(*matched);
  }
  flush_text(input.size());
  return tokens;
}

std::string normalize_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (char c : s) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

}  // namespace spider::templ
