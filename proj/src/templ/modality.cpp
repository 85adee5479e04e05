#include "spider/templ/modality.hpp"

namespace spider::templ {

namespace {

constexpr std::array<std::string_view, kModalityCount> kModalityNames{"IMAGE", "AUDIO", "VIDEO", "BOX",
                                                                      "MASK"};
constexpr std::array<std::string_view, kTaskPromptCount> kTaskNames{
    "TEXT", "IMAGE", "AUDIO", "VIDEO", "BOX", "MASK", "SMARTMULTIMODAL", "SPECIFICMULTIMODAL"};
constexpr std::array<std::string_view, kTaskPromptCount> kTaskTokens{
    "[TEXT]", "[IMAGE]", "[AUDIO]", "[VIDEO]", "[BOX]", "[MASK]", "[SMARTMULTIMODAL]", "[SPECIFICMULTIMODAL]"};

}  // namespace

std::string_view modality_name(Modality m) noexcept { return kModalityNames[modality_index(m)]; }

std::optional<Modality> parse_modality(std::string_view name) noexcept {
  for (Modality m : kAllModalities)
    if (modality_name(m) == name) return m;
  return std::nullopt;
}

std::string_view task_prompt_name(TaskPrompt t) noexcept { return kTaskNames[static_cast<std::size_t>(t)]; }

std::string_view task_prompt_token(TaskPrompt t) noexcept { return kTaskTokens[static_cast<std::size_t>(t)]; }

std::optional<TaskPrompt> parse_task_prompt_name(std::string_view name) noexcept {
  for (TaskPrompt t : kAllTaskPrompts)
    if (task_prompt_name(t) == name) return t;
  return std::nullopt;
}

TaskPrompt single_modal_task(Modality m) noexcept {
  switch (m) {
    case Modality::Image: return TaskPrompt::Image;
    case Modality::Audio: return TaskPrompt::Audio;
    case Modality::Video: return TaskPrompt::Video;
    case Modality::Box: return TaskPrompt::Box;
    case Modality::Mask: return TaskPrompt::Mask;
  }
  return TaskPrompt::Image;
}

std::optional<Modality> single_modal_target(TaskPrompt t) noexcept {
  switch (t) {
    case TaskPrompt::Image: return Modality::Image;
    case TaskPrompt::Audio: return Modality::Audio;
    case TaskPrompt::Video: return Modality::Video;
    case TaskPrompt::Box: return Modality::Box;
    case TaskPrompt::Mask: return Modality::Mask;
    default: return std::nullopt;
  }
}

}  // namespace spider::templ
