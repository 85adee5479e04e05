#include "spider/templ/json.hpp"

#include <stdexcept>

namespace spider::templ {

using nlohmann::json;

json to_json(const QuestionMessage& q) {
  json j;
  j["task_prompt"] = task_prompt_name(q.task_prompt);
  if (q.input_asset) {
    j["input_asset"] = {{"modality", modality_name(q.input_asset->modality)},
                        {"asset_ref", q.input_asset->asset_ref}};
  } else {
    j["input_asset"] = nullptr;
  }
  j["instruction"] = q.instruction;
  return j;
}

json to_json(const ModalityGroup& g) {
  return {{"text_response", g.text_response},
          {"modality", modality_name(g.modality)},
          {"t_prompt", g.t_prompt},
          {"m_prompt_index", g.m_prompt_index}};
}

json to_json(const AnswerMessage& a) {
  json groups = json::array();
  for (const auto& g : a.groups) groups.push_back(to_json(g));
  return {{"groups", std::move(groups)}, {"tail_text", a.tail_text}};
}

json to_json(const ParseError& e) {
  return {{"kind", parse_error_kind_name(e.kind)},
          {"position", e.position},
          {"context", e.context},
          {"message", e.message}};
}

Modality modality_from_json(const json& j) {
  const auto name = j.get<std::string>();
  const auto m = parse_modality(name);
  if (!m) throw std::invalid_argument("unknown modality '" + name + "'");
  return *m;
}

AnswerMessage answer_from_json(const json& j) {
  AnswerMessage a;
  for (const auto& g : j.at("groups")) {
    a.groups.push_back(ModalityGroup{g.at("text_response").get<std::string>(), modality_from_json(g.at("modality")),
                                     g.at("t_prompt").get<std::string>(), g.at("m_prompt_index").get<std::uint64_t>()});
  }
  a.tail_text = j.at("tail_text").get<std::string>();
  return a;
}

QuestionMessage question_from_json(const json& j) {
  QuestionMessage q;
  const auto task_name = j.at("task_prompt").get<std::string>();
  const auto task = parse_task_prompt_name(task_name);
  if (!task) throw std::invalid_argument("unknown task prompt '" + task_name + "'");
  q.task_prompt = *task;
  if (const auto& asset = j.at("input_asset"); !asset.is_null()) {
    q.input_asset = InputAsset{modality_from_json(asset.at("modality")), asset.at("asset_ref").get<std::string>()};
  }
  q.instruction = j.at("instruction").get<std::string>();
  return q;
}

}  // namespace spider::templ
