#include "spider/pipeline/pipeline.hpp"

#include <map>

#include "spider/templ/template.hpp"

namespace spider::pipeline {

PipelineResult run_pipeline(std::string_view question, const PipelineContext& ctx) {
  auto parsed = templ::parse_question(question);
  if (!parsed.ok()) throw QuestionParseError(parsed.error());

  PipelineResult result;
  result.question = parsed.value();
  result.answer = ctx.planner.plan_answer(result.question);

  const auto& cfg = ctx.controller.config();
  for (const auto& group : result.answer.groups) {
    const Tensor m_e = ctx.encoders.mock_llm_hidden(result.question, group, cfg.l_of(group.modality));
    const Tensor t_e = ctx.encoders.encode_text(group.t_prompt);
    Tensor s = ctx.controller.control_embedding(group.modality, m_e, t_e);
    const Decoded d = decode_modality(group.modality, s, ctx.gallery);
    result.realized.push_back({group.modality, d.asset_ref, d.score});
    result.control_embeddings.push_back(std::move(s));
  }
  return result;
}

controller::TrainingItem make_training_item(const MockEncoders& encoders, const QuestionMessage& q,
                                            const templ::ModalityGroup& group, const AssetRecord& target_asset,
                                            std::size_t l_rows) {
  return {group.modality, encoders.mock_llm_hidden(q, group, l_rows), encoders.encode_text(group.t_prompt),
          target_asset.encoder_embedding};
}

std::vector<controller::TrainingItem> self_reconstruction_items(const AssetGallery& gallery, const MockEncoders& encoders,
                                                                const controller::ControllerConfig& config) {
  std::vector<controller::TrainingItem> items;
  items.reserve(gallery.size());
  for (const AssetRecord& rec : gallery.records()) {
    const QuestionMessage q{templ::single_modal_task(rec.modality), templ::InputAsset{rec.modality, rec.asset_ref},
                            "Reconstruct this content"};
    const templ::ModalityGroup group{rec.caption + ".", rec.modality, templ::normalize_whitespace(rec.caption), 0};
    items.push_back(make_training_item(encoders, q, group, rec, config.l_of(rec.modality)));
  }
  return items;
}

std::vector<controller::TrainingItem> items_from_instances(
    const std::vector<std::pair<std::string, std::string>>& instances, const AssetGallery& gallery,
    const MockEncoders& encoders, const controller::ControllerConfig& config) {
  std::array<std::map<std::string, const AssetRecord*>, templ::kModalityCount> by_caption;
  for (const AssetRecord& rec : gallery.records()) {
    by_caption[templ::modality_index(rec.modality)].emplace(templ::normalize_whitespace(rec.caption), &rec);
  }
  std::vector<controller::TrainingItem> items;
  for (const auto& [question, answer] : instances) {
    const auto q = templ::parse_question(question);
    if (!q.ok()) throw QuestionParseError(q.error());
    const auto a = templ::parse_answer(answer);
    if (!a.ok()) throw QuestionParseError(a.error());
    for (const auto& group : a.value().groups) {
      const auto& index = by_caption[templ::modality_index(group.modality)];
      const auto it = index.find(group.t_prompt);
      if (it == index.end()) continue;
      items.push_back(make_training_item(encoders, q.value(), group, *it->second, config.l_of(group.modality)));
    }
  }
  return items;
}

}  // namespace spider::pipeline
