#pragma once

#include <array>
#include <cstddef>

#include <json.hpp>

#include "spider/templ/modality.hpp"

namespace spider::controller {

using templ::Modality;

/// Per-modality token counts, indexed by modality_index().
using PerModality = std::array<std::size_t, templ::kModalityCount>;

struct ControllerConfig {
  std::size_t D = 64;
  std::size_t D_c = 32;
  std::size_t K = 2;
  PerModality N{1, 1, 1, 1, 1};
  PerModality L{1, 1, 1, 1, 1};
  double alpha = 0.2;
  std::size_t expert_layers = 1;
  std::size_t router_hidden = 32;
  double lambda_recon = 1.0;

  [[nodiscard]] std::size_t n_of(Modality m) const { return N[templ::modality_index(m)]; }
  [[nodiscard]] std::size_t l_of(Modality m) const { return L[templ::modality_index(m)]; }

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;

  bool operator==(const ControllerConfig&) const = default;
};

nlohmann::json to_json(const ControllerConfig& c);
/// Missing fields keep their defaults. N and L accept either one integer for
/// every modality or an object keyed by modality name.
ControllerConfig config_from_json(const nlohmann::json& j);

}  // namespace spider::controller
