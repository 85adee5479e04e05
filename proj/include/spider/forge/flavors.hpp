#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "spider/pipeline/planner.hpp"
#include "spider/templ/modality.hpp"

namespace spider::forge {

using pipeline::InstructionTemplate;
using pipeline::MultiRequestTemplate;
using templ::Modality;

enum class Flavor : std::uint8_t {
  T2I,
  T2V,
  T2A,
  I2T,
  V2T,
  A2T,
  I2B,
  I2M,
  SmMI,
  SpMI,
  TGI,
};

inline constexpr std::size_t kFlavorCount = 11;
inline constexpr std::array<Flavor, kFlavorCount> kAllFlavors{
    Flavor::T2I, Flavor::T2V, Flavor::T2A, Flavor::I2T,  Flavor::V2T, Flavor::A2T,
    Flavor::I2B, Flavor::I2M, Flavor::SmMI, Flavor::SpMI, Flavor::TGI};

/// "t2txs-t2i", "x2txs-i2b", "smmi", ...
std::string_view flavor_name(Flavor f) noexcept;
std::optional<Flavor> parse_flavor(std::string_view name) noexcept;

struct FlavorInfo {
  /// Modality a source record must carry; empty for TGI, which draws from the
  /// bundled city list.
  std::optional<Modality> source_modality;
  /// Modality of the question's input wrapper; empty for text-only questions.
  std::optional<Modality> input_modality;
  std::size_t pool_size = 0;
  std::size_t pseudo_count = 0;
  bool multi_sample = false;
};

const FlavorInfo& flavor_info(Flavor f);

/// Single-instruction pool of a flavor; empty for SmMI.
const std::vector<InstructionTemplate>& instruction_pool(Flavor f);
/// Multi-request pool used by SmMI.
const std::vector<MultiRequestTemplate>& multi_request_pool();

/// Planner with every pool registered.
pipeline::Planner default_planner();

/// JSON array of objects with the InstructionTemplate fields. Parsing fills
/// missing optional fields with defaults and validates every template;
/// errors are std::invalid_argument naming the array index.
nlohmann::json pool_to_json(const std::vector<InstructionTemplate>& pool);
std::vector<InstructionTemplate> pool_from_json(const nlohmann::json& j);

/// 1000 distinct synthetic city names.
const std::vector<std::string>& city_names();

}  // namespace spider::forge
