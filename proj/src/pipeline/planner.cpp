#include "spider/pipeline/planner.hpp"

#include <algorithm>

#include "spider/templ/template.hpp"
#include "spider/templ/tokens.hpp"

namespace spider::pipeline {

namespace {

constexpr std::string_view kPlaceholder = "{}";

std::size_t count_placeholders(std::string_view s) {
  std::size_t n = 0;
  for (std::size_t pos = s.find(kPlaceholder); pos != std::string_view::npos; pos = s.find(kPlaceholder, pos + 2)) ++n;
  return n;
}

std::optional<std::string> match_single(std::string_view pattern, std::string_view text) {
  const std::size_t at = pattern.find(kPlaceholder);
  const std::string_view prefix = pattern.substr(0, at);
  const std::string_view suffix = pattern.substr(at + kPlaceholder.size());
  if (text.size() <= prefix.size() + suffix.size()) return std::nullopt;
  if (!text.starts_with(prefix) || !text.ends_with(suffix)) return std::nullopt;
  std::string content(text.substr(prefix.size(), text.size() - prefix.size() - suffix.size()));
  if (templ::normalize_whitespace(content) != content || content.empty()) return std::nullopt;
  return content;
}

}  // namespace

std::string fill(std::string_view format, std::string_view content) {
  std::string out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t at = format.find(kPlaceholder, pos);
    if (at == std::string_view::npos) break;
    out.append(format.substr(pos, at - pos));
    out.append(content);
    pos = at + kPlaceholder.size();
  }
  out.append(format.substr(pos));
  return out;
}

void InstructionTemplate::validate() const {
  if (count_placeholders(pattern) != 1) {
    throw std::invalid_argument("instruction pattern needs exactly one {}: '" + pattern + "'");
  }
  if (content_is_skeleton) {
    if (!target_modalities.empty()) throw std::invalid_argument("skeleton pattern lists its own targets: '" + pattern + "'");
    return;
  }
  if (task_prompt == TaskPrompt::Text) {
    if (!target_modalities.empty()) throw std::invalid_argument("[TEXT] pattern with target modalities: '" + pattern + "'");
  } else {
    if (target_modalities.empty()) throw std::invalid_argument("pattern without target modalities: '" + pattern + "'");
    if (const auto single = templ::single_modal_target(task_prompt);
        single && (target_modalities.size() != 1 || target_modalities[0] != *single)) {
      throw std::invalid_argument("single-modal pattern must target its own modality: '" + pattern + "'");
    }
  }
  if (!t_prompt_formats.empty() && t_prompt_formats.size() != target_modalities.size()) {
    throw std::invalid_argument("t_prompt_formats must match target_modalities: '" + pattern + "'");
  }
}

std::string InstructionTemplate::instantiate(std::string_view content) const { return fill(pattern, content); }

std::optional<std::string> InstructionTemplate::match(std::string_view instruction) const {
  return match_single(pattern, instruction);
}

void MultiRequestTemplate::validate() const {
  if (segment_patterns.empty()) throw std::invalid_argument("multi-request template without segments");
  if (separator.empty()) throw std::invalid_argument("multi-request template with an empty separator");
  for (const auto& [m, p] : segment_patterns) {
    if (count_placeholders(p) != 1) throw std::invalid_argument("segment pattern needs exactly one {}: '" + p + "'");
  }
}

std::string MultiRequestTemplate::instantiate(const std::vector<std::pair<Modality, std::string>>& requests) const {
  std::string out = lead;
  for (std::size_t i = 0; i < requests.size(); ++i) {
    const auto& [m, content] = requests[i];
    const auto it = std::find_if(segment_patterns.begin(), segment_patterns.end(),
                                 [m = m](const auto& sp) { return sp.first == m; });
    if (it == segment_patterns.end()) {
      throw std::invalid_argument("no segment pattern for " + std::string(templ::modality_name(m)));
    }
    if (i) out += separator;
    out += fill(it->second, content);
  }
  return out;
}

std::optional<std::vector<std::pair<Modality, std::string>>> MultiRequestTemplate::match(
    std::string_view instruction) const {
  if (!instruction.starts_with(lead)) return std::nullopt;
  std::string_view rest = instruction.substr(lead.size());
  std::vector<std::pair<Modality, std::string>> out;
  while (true) {
    const std::size_t cut = rest.find(separator);
    const std::string_view segment = rest.substr(0, cut);
    std::optional<std::pair<Modality, std::string>> found;
    for (const auto& [m, p] : segment_patterns) {
      if (auto content = match_single(p, segment)) {
        found = std::make_pair(m, std::move(*content));
        break;
      }
    }
    if (!found) return std::nullopt;
    out.push_back(std::move(*found));
    if (cut == std::string_view::npos) break;
    rest = rest.substr(cut + separator.size());
  }
  if (out.size() < 2) return std::nullopt;
  return out;
}

AnswerMessage construct_answer(const InstructionTemplate& t, std::string_view content) {
  AnswerMessage a;
  if (t.content_is_skeleton) {
    const auto parsed = templ::parse_answer("[OUT] " + std::string(content) + " [END]");
    if (!parsed.ok() || parsed.value().groups.empty()) {
      throw std::invalid_argument("instruction skeleton is not a group sequence: '" + std::string(content) + "'");
    }
    std::vector<std::pair<Modality, std::string>> requests;
    for (const auto& g : parsed.value().groups) requests.emplace_back(g.modality, g.t_prompt);
    return construct_multi_answer(requests);
  }
  const std::string lead = templ::normalize_whitespace(fill(t.lead_format, content));
  if (t.task_prompt == TaskPrompt::Text) {
    a.tail_text = lead;
    return a;
  }
  for (std::size_t i = 0; i < t.target_modalities.size(); ++i) {
    templ::ModalityGroup g;
    g.text_response = i == 0 ? lead : ".";
    g.modality = t.target_modalities[i];
    g.t_prompt = templ::normalize_whitespace(t.t_prompt_formats.empty() ? std::string(content)
                                                                         : fill(t.t_prompt_formats[i], content));
    g.m_prompt_index = 0;
    a.groups.push_back(std::move(g));
  }
  return a;
}

AnswerMessage construct_multi_answer(const std::vector<std::pair<Modality, std::string>>& requests) {
  AnswerMessage a;
  for (const auto& [m, caption] : requests) {
    const std::string t_prompt = templ::normalize_whitespace(caption);
    a.groups.push_back({t_prompt + ".", m, t_prompt, 0});
  }
  return a;
}

Planner::Planner(std::vector<InstructionTemplate> templates, std::vector<MultiRequestTemplate> multi) {
  for (auto& t : templates) add(std::move(t));
  for (auto& m : multi) add(std::move(m));
}

void Planner::add(InstructionTemplate t) {
  t.validate();
  templates_.push_back(std::move(t));
}

void Planner::add(MultiRequestTemplate t) {
  t.validate();
  multi_.push_back(std::move(t));
}

AnswerMessage Planner::plan_answer(const QuestionMessage& q) const {
  const std::optional<Modality> input =
      q.input_asset ? std::optional<Modality>(q.input_asset->modality) : std::nullopt;
  const InstructionTemplate* best = nullptr;
  std::string best_content;
  for (const auto& t : templates_) {
    if (t.task_prompt != q.task_prompt || t.requires_input_modality != input) continue;
    auto content = t.match(q.instruction);
    if (!content) continue;
    if (t.content_is_skeleton) {
      const auto parsed = templ::parse_answer("[OUT] " + *content + " [END]");
      if (!parsed.ok() || parsed.value().groups.empty()) continue;
    }
    // Prefer the pattern with the most literal text; it is the most specific.
    if (!best || t.pattern.size() > best->pattern.size()) {
      best = &t;
      best_content = std::move(*content);
    }
  }
  if (best) return construct_answer(*best, best_content);

  if (!input) {
    for (const auto& m : multi_) {
      if (m.task_prompt != q.task_prompt) continue;
      if (auto requests = m.match(q.instruction)) return construct_multi_answer(*requests);
    }
  }
  throw UnmatchedInstruction("no registered instruction pattern matches [" +
                             std::string(templ::task_prompt_name(q.task_prompt)) + "] '" + q.instruction + "'");
}

}  // namespace spider::pipeline
