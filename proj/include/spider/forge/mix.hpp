#pragma once

#include <string>
#include <utility>
#include <vector>

#include "spider/numerics/random.hpp"

namespace spider::forge {

/// Dataset proportions of one training stage.
struct StageMix {
  int stage = 0;
  std::vector<std::pair<std::string, double>> entries;

  /// Throws std::invalid_argument unless every proportion is positive and
  /// they sum to 1 within 1e-9.
  void validate() const;
  [[nodiscard]] double proportion(const std::string& name) const;
};

/// Stage 1 mixes the existing caption and grounding sets; stages 2 and 3 mix
/// forge flavors. Throws std::invalid_argument for a stage outside 1..3.
const StageMix& stage_mix(int stage);

/// Names of the stage-1 source datasets ("cc3m-i2t", ...).
const std::vector<std::string>& stage1_dataset_names();

/// One categorical draw. Validates the mix first.
const std::string& stage_sampler_next(const StageMix& mix, numerics::Rng& rng);

}  // namespace spider::forge
