#include "spider/templ/template.hpp"

#include <algorithm>
#include <cctype>
#include <optional>

namespace spider::templ {

namespace {

constexpr std::string_view kAssetPrefix = "{asset:";

std::string excerpt(std::string_view input, std::size_t pos) {
  const std::size_t begin = pos > 20 ? pos - 20 : 0;
  return std::string(input.substr(begin, 40));
}

ParseError make_error(ParseErrorKind kind, std::string_view input, std::size_t pos, std::string message) {
  if (!input.empty()) pos = std::min(pos, input.size() - 1);
  else pos = 0;
  return ParseError{kind, pos, excerpt(input, pos), std::move(message)};
}

std::size_t skip_blank(const std::vector<Token>& toks, std::size_t i) {
  while (i < toks.size() && toks[i].is_blank_text()) ++i;
  return i;
}

bool is_asset_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_' || c == '-' || c == '.' || c == ':' ||
         c == '/';
}

// "{asset:<id>}" -> id
std::optional<std::string> asset_ref_of(std::string_view text) {
  const std::string trimmed = normalize_whitespace(text);
  std::string_view t = trimmed;
  if (!t.starts_with(kAssetPrefix) || !t.ends_with('}')) return std::nullopt;
  t.remove_prefix(kAssetPrefix.size());
  t.remove_suffix(1);
  if (t.empty() || !std::all_of(t.begin(), t.end(), is_asset_char)) return std::nullopt;
  return std::string(t);
}

bool is_punctuation_start(std::string_view text) {
  return !text.empty() && std::ispunct(static_cast<unsigned char>(text.front())) != 0;
}

// Appends free text, separated from a preceding closing tag by a space
// unless the text starts with punctuation (". <VIDEO>").
void append_free_text(std::string& out, std::string_view text) {
  if (text.empty()) return;
  if (!out.empty() && out.back() != ' ' && !is_punctuation_start(text)) out.push_back(' ');
  out.append(text);
}

void require_plain_text(std::string_view field, std::string_view text) {
  for (const Token& t : tokenize(text)) {
    if (t.kind != TokenKind::Text) {
      throw SerializeError(std::string(field) + " contains structural token '" + std::string(t.lexeme) + "'");
    }
  }
}

}  // namespace

std::string_view parse_error_kind_name(ParseErrorKind k) noexcept {
  switch (k) {
    case ParseErrorKind::UnknownToken: return "UnknownToken";
    case ParseErrorKind::UnbalancedTag: return "UnbalancedTag";
    case ParseErrorKind::TagMismatch: return "TagMismatch";
    case ParseErrorKind::MissingStartSignal: return "MissingStartSignal";
    case ParseErrorKind::MissingEndSignal: return "MissingEndSignal";
    case ParseErrorKind::MPromptOutsideGroup: return "MPromptOutsideGroup";
    case ParseErrorKind::MPromptModalityMismatch: return "MPromptModalityMismatch";
    case ParseErrorKind::DuplicateInputAsset: return "DuplicateInputAsset";
  }
  return "";
}

std::string ParseError::describe() const {
  return std::string(parse_error_kind_name(kind)) + " at offset " + std::to_string(position) + ": " + message +
         " (near \"" + context + "\")";
}

Parsed<QuestionMessage> parse_question(std::string_view input) {
  const auto toks = tokenize(input);
  const std::size_t n = toks.size();
  std::size_t i = skip_blank(toks, 0);
  if (i == n || toks[i].kind != TokenKind::Signal || toks[i].signal != Signal::Input) {
    return make_error(ParseErrorKind::MissingStartSignal, input, i == n ? 0 : toks[i].offset,
                      "question must start with [INPUT]");
  }
  i = skip_blank(toks, i + 1);
  if (i == n) {
    return make_error(ParseErrorKind::UnknownToken, input, input.size(), "missing task prompt after [INPUT]");
  }
  if (toks[i].kind != TokenKind::TaskPrompt) {
    const auto lead = toks[i].lexeme.find_first_not_of(" \t\r\n");
    return make_error(ParseErrorKind::UnknownToken, input,
                      toks[i].offset + (lead == std::string_view::npos ? 0 : lead),
                      "expected a task prompt, found '" + std::string(toks[i].lexeme.substr(0, 24)) + "'");
  }

  QuestionMessage q;
  q.task_prompt = toks[i].task;
  std::string instruction;
  std::optional<Token> open_tag;

  for (std::size_t j = i + 1; j < n; ++j) {
    const Token& t = toks[j];
    switch (t.kind) {
      case TokenKind::Text:
      case TokenKind::MPrompt:
        instruction.append(t.lexeme);
        break;
      case TokenKind::Signal:
      case TokenKind::TaskPrompt:
        return make_error(ParseErrorKind::UnknownToken, input, t.offset,
                          "misplaced '" + std::string(t.lexeme) + "' inside a question");
      case TokenKind::BeginTag: {
        if (open_tag) {
          return make_error(ParseErrorKind::UnbalancedTag, input, t.offset, "nested begin tag");
        }
        if (j + 1 < n && toks[j + 1].kind == TokenKind::Text) {
          if (auto ref = asset_ref_of(toks[j + 1].lexeme)) {
            if (j + 2 >= n || toks[j + 2].kind != TokenKind::EndTag) {
              return make_error(ParseErrorKind::UnbalancedTag, input, t.offset, "unterminated input asset wrapper");
            }
            if (toks[j + 2].modality != t.modality) {
              return make_error(ParseErrorKind::TagMismatch, input, toks[j + 2].offset,
                                "wrapper opened as " + std::string(modality_name(t.modality)) + " closed as " +
                                    std::string(modality_name(toks[j + 2].modality)));
            }
            if (q.input_asset) {
              return make_error(ParseErrorKind::DuplicateInputAsset, input, t.offset,
                                "a question carries at most one input asset");
            }
            q.input_asset = InputAsset{t.modality, std::move(*ref)};
            instruction.push_back(' ');
            j += 2;
            break;
          }
        }
        open_tag = t;
        instruction.append(t.lexeme);
        break;
      }
      case TokenKind::EndTag:
        if (!open_tag) {
          return make_error(ParseErrorKind::UnbalancedTag, input, t.offset, "end tag without begin tag");
        }
        if (open_tag->modality != t.modality) {
          return make_error(ParseErrorKind::TagMismatch, input, t.offset, "end tag does not match begin tag");
        }
        open_tag.reset();
        instruction.append(t.lexeme);
        break;
    }
  }
  if (open_tag) {
    return make_error(ParseErrorKind::UnbalancedTag, input, open_tag->offset, "begin tag never closed");
  }
  q.instruction = normalize_whitespace(instruction);
  return q;
}

std::string serialize_question(const QuestionMessage& q) {
  const std::string instruction = normalize_whitespace(q.instruction);
  {
    const auto toks = tokenize(instruction);
    std::optional<Modality> open;
    for (std::size_t j = 0; j < toks.size(); ++j) {
      const Token& t = toks[j];
      if (t.kind == TokenKind::Signal || t.kind == TokenKind::TaskPrompt) {
        throw SerializeError("instruction contains '" + std::string(t.lexeme) + "'");
      }
      if (t.kind == TokenKind::BeginTag) {
        if (open) throw SerializeError("instruction contains nested tags");
        if (j + 1 < toks.size() && toks[j + 1].kind == TokenKind::Text && asset_ref_of(toks[j + 1].lexeme)) {
          throw SerializeError("instruction contains an input asset wrapper");
        }
        open = t.modality;
      } else if (t.kind == TokenKind::EndTag) {
        if (!open || *open != t.modality) throw SerializeError("instruction contains unbalanced tags");
        open.reset();
      }
    }
    if (open) throw SerializeError("instruction contains an unclosed tag");
  }

  std::string out(signal_token(Signal::Input));
  out.push_back(' ');
  out.append(task_prompt_token(q.task_prompt));
  if (q.input_asset) {
    const auto& a = *q.input_asset;
    if (!asset_ref_of(std::string(kAssetPrefix) + a.asset_ref + "}")) {
      throw SerializeError("invalid asset reference '" + a.asset_ref + "'");
    }
    const std::string_view name = modality_name(a.modality);
    out += " <";
    out += name;
    out += ">";
    out += kAssetPrefix;
    out += a.asset_ref;
    out += "}</";
    out += name;
    out += ">";
  }
  if (!instruction.empty()) {
    out.push_back(' ');
    out += instruction;
  }
  return out;
}

Parsed<AnswerMessage> parse_answer(std::string_view input) {
  const auto toks = tokenize(input);
  const std::size_t n = toks.size();
  const std::size_t first = skip_blank(toks, 0);
  if (first == n || toks[first].kind != TokenKind::Signal || toks[first].signal != Signal::Out) {
    return make_error(ParseErrorKind::MissingStartSignal, input, first == n ? 0 : toks[first].offset,
                      "answer must start with [OUT]");
  }
  std::size_t last = n;
  while (last > first + 1 && toks[last - 1].is_blank_text()) --last;
  --last;
  if (last == first || toks[last].kind != TokenKind::Signal || toks[last].signal != Signal::End) {
    return make_error(ParseErrorKind::MissingEndSignal, input, input.size(), "answer must end with [END]");
  }

  AnswerMessage answer;
  std::string pending;
  std::optional<Token> open;
  std::size_t open_offset = 0;
  ModalityGroup group;
  std::string t_prompt;
  bool have_mprompt = false;

  for (std::size_t j = first + 1; j < last; ++j) {
    const Token& t = toks[j];
    if (!open) {
      switch (t.kind) {
        case TokenKind::Text:
          pending.append(t.lexeme);
          break;
        case TokenKind::BeginTag:
          open = t;
          open_offset = t.offset;
          group = ModalityGroup{normalize_whitespace(pending), t.modality, {}, 0};
          pending.clear();
          t_prompt.clear();
          have_mprompt = false;
          break;
        case TokenKind::EndTag:
          return make_error(ParseErrorKind::UnbalancedTag, input, t.offset, "end tag without begin tag");
        case TokenKind::MPrompt:
          return make_error(ParseErrorKind::MPromptOutsideGroup, input, t.offset,
                            "M-Prompt outside of a begin-end pair");
        case TokenKind::Signal:
        case TokenKind::TaskPrompt:
          return make_error(ParseErrorKind::UnknownToken, input, t.offset,
                            "misplaced '" + std::string(t.lexeme) + "' inside an answer");
      }
      continue;
    }
    switch (t.kind) {
      case TokenKind::Text:
        if (!have_mprompt) {
          t_prompt.append(t.lexeme);
        } else if (!t.is_blank_text()) {
          return make_error(ParseErrorKind::UnknownToken, input, t.offset, "text after the M-Prompt of a group");
        }
        break;
      case TokenKind::MPrompt:
        if (have_mprompt) {
          return make_error(ParseErrorKind::UnknownToken, input, t.offset, "second M-Prompt in one group");
        }
        if (t.modality != open->modality) {
          return make_error(ParseErrorKind::MPromptModalityMismatch, input, t.offset,
                            "M-Prompt " + std::string(t.lexeme) + " inside <" +
                                std::string(modality_name(open->modality)) + ">");
        }
        have_mprompt = true;
        group.m_prompt_index = t.index;
        break;
      case TokenKind::BeginTag:
        return make_error(ParseErrorKind::UnbalancedTag, input, t.offset, "nested begin tag");
      case TokenKind::EndTag:
        if (t.modality != open->modality) {
          return make_error(ParseErrorKind::TagMismatch, input, t.offset,
                            "<" + std::string(modality_name(open->modality)) + "> closed by " +
                                std::string(t.lexeme));
        }
        if (!have_mprompt) {
          return make_error(ParseErrorKind::UnknownToken, input, t.offset, "group closed without an M-Prompt");
        }
        group.t_prompt = normalize_whitespace(t_prompt);
        if (group.t_prompt.empty()) {
          return make_error(ParseErrorKind::UnknownToken, input, open_offset, "group has an empty T-Prompt");
        }
        answer.groups.push_back(std::move(group));
        open.reset();
        break;
      case TokenKind::Signal:
      case TokenKind::TaskPrompt:
        return make_error(ParseErrorKind::UnknownToken, input, t.offset,
                          "misplaced '" + std::string(t.lexeme) + "' inside a group");
    }
  }
  if (open) return make_error(ParseErrorKind::UnbalancedTag, input, open_offset, "begin tag never closed");
  answer.tail_text = normalize_whitespace(pending);
  return answer;
}

std::string serialize_group_skeleton(const std::vector<ModalityGroup>& groups) {
  std::string out;
  for (const auto& g : groups) {
    const std::string t_prompt = normalize_whitespace(g.t_prompt);
    if (t_prompt.empty()) throw SerializeError("group has an empty t_prompt");
    require_plain_text("t_prompt", t_prompt);
    const std::string_view name = modality_name(g.modality);
    if (!out.empty()) out.push_back(' ');
    out += "<";
    out += name;
    out += "> ";
    out += t_prompt;
    out += " [";
    out += name;
    out += "_";
    out += std::to_string(g.m_prompt_index);
    out += "] </";
    out += name;
    out += ">";
  }
  return out;
}

std::string serialize_answer(const AnswerMessage& a) {
  std::string out(signal_token(Signal::Out));
  out.push_back(' ');
  for (const auto& g : a.groups) {
    const std::string text = normalize_whitespace(g.text_response);
    require_plain_text("text_response", text);
    append_free_text(out, text);
    if (out.back() != ' ') out.push_back(' ');
    out += serialize_group_skeleton({g});
  }
  const std::string tail = normalize_whitespace(a.tail_text);
  require_plain_text("tail_text", tail);
  append_free_text(out, tail);
  if (out.back() != ' ') out.push_back(' ');
  out.append(signal_token(Signal::End));
  return out;
}

std::vector<Modality> group_modalities(const AnswerMessage& a) {
  std::vector<Modality> out;
  out.reserve(a.groups.size());
  for (const auto& g : a.groups) out.push_back(g.modality);
  return out;
}

std::vector<std::string> validate_answer_against_task(TaskPrompt task, const AnswerMessage& a) {
  std::vector<std::string> violations;
  if (task == TaskPrompt::Text) {
    if (!a.groups.empty()) {
      violations.push_back("[TEXT] answers carry no modality groups, found " + std::to_string(a.groups.size()));
    }
    if (a.tail_text.empty()) violations.emplace_back("[TEXT] answers need a non-empty text response");
    return violations;
  }
  if (auto target = single_modal_target(task)) {
    if (a.groups.size() != 1) {
      violations.push_back(std::string(task_prompt_token(task)) + " expects exactly one group, found " +
                           std::to_string(a.groups.size()));
    }
    for (const auto& g : a.groups) {
      if (g.modality != *target) {
        violations.push_back(std::string(task_prompt_token(task)) + " cannot produce a " +
                             std::string(modality_name(g.modality)) + " group");
      }
    }
  }
  // Smart and specific multimodal tasks accept any group multiset.
  return violations;
}

}  // namespace spider::templ
