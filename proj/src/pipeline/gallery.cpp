#include "spider/pipeline/gallery.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include <json.hpp>

#include "spider/templ/json.hpp"

namespace spider::pipeline {

namespace {

std::vector<double> embedding_key(const Tensor& t) {
  std::vector<double> v(t.data().begin(), t.data().end());
  return v;
}

}  // namespace

AssetGallery::AssetGallery(const std::vector<GalleryEntry>& entries, const MockEncoders& encoders) {
  std::array<std::map<std::vector<double>, std::size_t>, templ::kModalityCount> seen_text;
  std::map<std::vector<double>, std::size_t> seen_encoder;
  for (const auto& entry : entries) {
    if (entry.asset_ref.empty()) throw GalleryError("gallery asset with an empty asset_ref");
    if (index_.count(entry.asset_ref)) throw GalleryError("duplicate asset_ref '" + entry.asset_ref + "'");
    AssetRecord rec;
    rec.asset_ref = entry.asset_ref;
    rec.modality = entry.modality;
    rec.caption = entry.caption;
    try {
      rec.target_embedding = encoders.encode_text(entry.caption);
    } catch (const std::invalid_argument&) {
      throw GalleryError("asset '" + entry.asset_ref + "' has a blank caption");
    }
    rec.encoder_embedding = encoders.encode_modality(entry.asset_ref, entry.modality);

    const std::size_t idx = records_.size();
    auto& text_bucket = seen_text[templ::modality_index(entry.modality)];
    if (auto [it, fresh] = text_bucket.emplace(embedding_key(rec.target_embedding), idx); !fresh) {
      throw GalleryError("captions of '" + records_[it->second].asset_ref + "' and '" + entry.asset_ref +
                         "' have identical text encodings");
    }
    if (auto [it, fresh] = seen_encoder.emplace(embedding_key(rec.encoder_embedding), idx); !fresh) {
      throw GalleryError("assets '" + records_[it->second].asset_ref + "' and '" + entry.asset_ref +
                         "' have identical encoder embeddings");
    }
    index_.emplace(rec.asset_ref, idx);
    by_modality_[templ::modality_index(rec.modality)].push_back(idx);
    records_.push_back(std::move(rec));
  }
}

AssetGallery AssetGallery::load_jsonl(const std::filesystem::path& path, const MockEncoders& encoders) {
  std::ifstream in(path);
  if (!in) throw GalleryError("cannot open gallery '" + path.string() + "'");
  std::vector<GalleryEntry> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      entries.push_back({j.at("asset_ref").get<std::string>(), templ::modality_from_json(j.at("modality")),
                         j.at("caption").get<std::string>()});
    } catch (const std::exception& e) {
      throw GalleryError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return AssetGallery(entries, encoders);
}

bool AssetGallery::contains(std::string_view asset_ref) const { return index_.count(std::string(asset_ref)) > 0; }

const AssetRecord& AssetGallery::at(std::string_view asset_ref) const {
  const auto it = index_.find(std::string(asset_ref));
  if (it == index_.end()) throw GalleryError("unknown asset '" + std::string(asset_ref) + "'");
  return records_[it->second];
}

const std::vector<std::size_t>& AssetGallery::of_modality(Modality m) const {
  return by_modality_[templ::modality_index(m)];
}

void write_gallery_jsonl(const std::filesystem::path& path, const std::vector<GalleryEntry>& entries) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw GalleryError("cannot write gallery '" + path.string() + "'");
  for (const auto& e : entries) {
    nlohmann::json j = {{"asset_ref", e.asset_ref}, {"modality", templ::modality_name(e.modality)}, {"caption", e.caption}};
    out << j.dump() << "\n";
  }
}

Decoded decode_modality(Modality m, const Tensor& s, const AssetGallery& gallery) {
  const auto& candidates = gallery.of_modality(m);
  if (candidates.empty()) {
    throw GalleryError("gallery has no " + std::string(templ::modality_name(m)) + " assets");
  }
  const AssetRecord* best = nullptr;
  double best_score = 0.0;
  for (std::size_t idx : candidates) {
    const AssetRecord& rec = gallery.records()[idx];
    const double score = numerics::cosine(s.data(), rec.target_embedding.data());
    if (!best || score > best_score || (score == best_score && rec.asset_ref < best->asset_ref)) {
      best = &rec;
      best_score = score;
    }
  }
  return {best->asset_ref, best_score};
}

}  // namespace spider::pipeline
