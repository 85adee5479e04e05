#pragma once

#include <cstdint>
#include <vector>

#include "spider/forge/captions.hpp"
#include "spider/numerics/random.hpp"
#include "spider/pipeline/gallery.hpp"

namespace spider::forge {

/// Templated stand-in corpora: image, video and audio captions plus box and
/// mask object phrases that point at the generated images.
struct SyntheticCorpus {
  std::vector<CaptionRecord> captions;
  /// One asset per caption record, keyed by the record id.
  std::vector<pipeline::GalleryEntry> gallery;
};

/// `per_modality` records for each of IMAGE, VIDEO, AUDIO, BOX and MASK, so
/// the gallery holds 5 * per_modality assets. Captions are unique within a
/// modality. Throws std::invalid_argument when per_modality is 0 or exceeds
/// the phrase space (1280).
SyntheticCorpus synthesize_corpus(std::uint64_t seed, std::size_t per_modality);

}  // namespace spider::forge
