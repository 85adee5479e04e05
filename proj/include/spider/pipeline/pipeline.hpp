#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "spider/controller/controller.hpp"
#include "spider/pipeline/encoders.hpp"
#include "spider/pipeline/gallery.hpp"
#include "spider/pipeline/planner.hpp"
#include "spider/templ/messages.hpp"

namespace spider::pipeline {

class QuestionParseError : public std::runtime_error {
 public:
  explicit QuestionParseError(templ::ParseError error)
      : std::runtime_error(error.describe()), error_(std::move(error)) {}
  [[nodiscard]] const templ::ParseError& error() const noexcept { return error_; }

 private:
  templ::ParseError error_;
};

struct RealizedGroup {
  Modality modality = Modality::Image;
  std::string asset_ref;
  double score = 0.0;
};

struct PipelineResult {
  QuestionMessage question;
  AnswerMessage answer;
  std::vector<RealizedGroup> realized;
  std::vector<Tensor> control_embeddings;
};

/// Everything a pipeline run reads; all members are treated as immutable.
struct PipelineContext {
  const controller::Controller& controller;
  const AssetGallery& gallery;
  const MockEncoders& encoders;
  const Planner& planner;
};

/// parse -> plan -> per group: M_e -> UDP -> T_e -> TM-Fusion -> decode.
/// Throws QuestionParseError, UnmatchedInstruction or GalleryError.
PipelineResult run_pipeline(std::string_view question, const PipelineContext& ctx);

/// Controller training example for one answer group. E comes from
/// `target_asset`.
controller::TrainingItem make_training_item(const MockEncoders& encoders, const QuestionMessage& q,
                                            const templ::ModalityGroup& group, const AssetRecord& target_asset,
                                            std::size_t l_rows);

/// One item per gallery asset: a single-modal question that carries the
/// asset as input and asks for its own caption back.
std::vector<controller::TrainingItem> self_reconstruction_items(const AssetGallery& gallery, const MockEncoders& encoders,
                                                                const controller::ControllerConfig& config);

/// Items from (question, answer) pairs: every group whose T-Prompt equals a
/// gallery caption of its modality yields one item; other groups are skipped.
std::vector<controller::TrainingItem> items_from_instances(
    const std::vector<std::pair<std::string, std::string>>& instances, const AssetGallery& gallery,
    const MockEncoders& encoders, const controller::ControllerConfig& config);

}  // namespace spider::pipeline
