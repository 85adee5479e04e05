#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>

namespace spider::templ {

/// Output modalities addressable by a begin-end tag pair.
enum class Modality : std::uint8_t { Image, Audio, Video, Box, Mask };

inline constexpr std::size_t kModalityCount = 5;
inline constexpr std::array<Modality, kModalityCount> kAllModalities{
    Modality::Image, Modality::Audio, Modality::Video, Modality::Box, Modality::Mask};

/// Upper-case tag spelling: "IMAGE", "AUDIO", ...
std::string_view modality_name(Modality m) noexcept;
std::optional<Modality> parse_modality(std::string_view name) noexcept;
constexpr std::size_t modality_index(Modality m) noexcept { return static_cast<std::size_t>(m); }

/// Output-mode selector following [INPUT]. Six single-modal modes plus the
/// smart and specific multimodal modes.
enum class TaskPrompt : std::uint8_t {
  Text,
  Image,
  Audio,
  Video,
  Box,
  Mask,
  SmartMultimodal,
  SpecificMultimodal,
};

inline constexpr std::size_t kTaskPromptCount = 8;
inline constexpr std::array<TaskPrompt, kTaskPromptCount> kAllTaskPrompts{
    TaskPrompt::Text,  TaskPrompt::Image, TaskPrompt::Audio,           TaskPrompt::Video,
    TaskPrompt::Box,   TaskPrompt::Mask,  TaskPrompt::SmartMultimodal, TaskPrompt::SpecificMultimodal};

/// Name without brackets, e.g. "SMARTMULTIMODAL".
std::string_view task_prompt_name(TaskPrompt t) noexcept;
/// Bracketed token spelling, e.g. "[SMARTMULTIMODAL]".
std::string_view task_prompt_token(TaskPrompt t) noexcept;
std::optional<TaskPrompt> parse_task_prompt_name(std::string_view name) noexcept;

/// The single-modal task that requests exactly `m`.
TaskPrompt single_modal_task(Modality m) noexcept;
/// The modality requested by a single-modal task; empty for [TEXT] and the
/// multimodal tasks.
std::optional<Modality> single_modal_target(TaskPrompt t) noexcept;

}  // namespace spider::templ
