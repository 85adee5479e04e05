#pragma once

#include <filesystem>
#include <istream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "spider/templ/modality.hpp"

namespace spider::forge {

using templ::Modality;

/// One row of a source corpus. `source_modality` is empty for text-only
/// sources ("TEXT" in files). For box and mask rows `asset_ref` names the
/// image the annotation belongs to and `caption` is the object phrase.
struct CaptionRecord {
  std::string id;
  std::string caption;
  std::optional<Modality> source_modality;
  std::string asset_ref;

  bool operator==(const CaptionRecord&) const = default;
};

class CaptionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// JSON Lines with fields id, caption, source_modality, asset_ref. Blank lines
/// are skipped. Errors name the file and line.
std::vector<CaptionRecord> load_captions(const std::filesystem::path& path);
std::vector<CaptionRecord> parse_captions(std::istream& in, const std::string& source_name);
void write_captions(const std::filesystem::path& path, const std::vector<CaptionRecord>& records);

}  // namespace spider::forge
