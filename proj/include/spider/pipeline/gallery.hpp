#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "spider/pipeline/encoders.hpp"

namespace spider::pipeline {

struct AssetRecord {
  std::string asset_ref;
  Modality modality = Modality::Image;
  std::string caption;
  Tensor target_embedding;   // 1 x D_c, text encoding of the caption
  Tensor encoder_embedding;  // 1 x D
};

class GalleryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GalleryEntry {
  std::string asset_ref;
  Modality modality = Modality::Image;
  std::string caption;
};

/// The mock decoders' retrieval universe. Immutable after construction.
class AssetGallery {
 public:
  /// Derives embeddings and checks that asset refs are unique, that captions
  /// within a modality have distinct text encodings and that encoder
  /// embeddings are pairwise distinct.
  AssetGallery(const std::vector<GalleryEntry>& entries, const MockEncoders& encoders);

  /// JSON Lines: {"asset_ref", "modality", "caption"} per line.
  static AssetGallery load_jsonl(const std::filesystem::path& path, const MockEncoders& encoders);

  [[nodiscard]] const std::vector<AssetRecord>& records() const noexcept { return records_; }
  [[nodiscard]] std::size_t size() const noexcept { return records_.size(); }
  [[nodiscard]] bool contains(std::string_view asset_ref) const;
  /// Throws GalleryError for an unknown asset.
  [[nodiscard]] const AssetRecord& at(std::string_view asset_ref) const;
  /// Indices into records() of one modality, in file order.
  [[nodiscard]] const std::vector<std::size_t>& of_modality(Modality m) const;

 private:
  std::vector<AssetRecord> records_;
  std::unordered_map<std::string, std::size_t> index_;
  std::array<std::vector<std::size_t>, templ::kModalityCount> by_modality_;
};

void write_gallery_jsonl(const std::filesystem::path& path, const std::vector<GalleryEntry>& entries);

struct Decoded {
  std::string asset_ref;
  double score = 0.0;
};

/// Mock decoder: the gallery asset of modality `m` whose target embedding has
/// the highest cosine with `s`; ties go to the lexicographically smallest
/// asset_ref. Throws GalleryError when the modality has no assets.
Decoded decode_modality(Modality m, const Tensor& s, const AssetGallery& gallery);

}  // namespace spider::pipeline
