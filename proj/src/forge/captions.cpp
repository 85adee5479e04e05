#include "spider/forge/captions.hpp"

#include <fstream>
#include <unordered_map>

#include <json.hpp>

#include "spider/templ/tokens.hpp"

namespace spider::forge {

namespace {

std::string required_string(const nlohmann::json& j, const char* field) {
  if (!j.contains(field)) throw CaptionError(std::string("missing \"") + field + "\"");
  if (!j.at(field).is_string()) throw CaptionError(std::string("\"") + field + "\" must be a string");
  return j.at(field).get<std::string>();
}

}  // namespace

std::vector<CaptionRecord> parse_captions(std::istream& in, const std::string& source_name) {
  std::vector<CaptionRecord> out;
  std::unordered_map<std::string, std::size_t> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = source_name + ":" + std::to_string(line_no) + ": ";
    CaptionRecord rec;
    try {
      const auto j = nlohmann::json::parse(line);
      if (!j.is_object()) throw CaptionError("expected a JSON object");
      rec.id = required_string(j, "id");
      rec.caption = templ::normalize_whitespace(required_string(j, "caption"));
      const std::string src = j.contains("source_modality") ? required_string(j, "source_modality") : "TEXT";
      if (src != "TEXT") {
        rec.source_modality = templ::parse_modality(src);
        if (!rec.source_modality) throw CaptionError("unknown source_modality '" + src + "'");
      }
      rec.asset_ref = j.contains("asset_ref") ? required_string(j, "asset_ref") : rec.id;
    } catch (const nlohmann::json::exception& e) {
      throw CaptionError(where + e.what());
    } catch (const CaptionError& e) {
      throw CaptionError(where + e.what());
    }
    if (rec.id.empty()) throw CaptionError(where + "empty \"id\"");
    if (rec.caption.empty()) throw CaptionError(where + "empty \"caption\"");
    if (auto [it, fresh] = ids.emplace(rec.id, line_no); !fresh) {
      throw CaptionError(where + "duplicate id '" + rec.id + "' (first on line " + std::to_string(it->second) + ")");
    }
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<CaptionRecord> load_captions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CaptionError("cannot open captions file '" + path.string() + "'");
  return parse_captions(in, path.string());
}

void write_captions(const std::filesystem::path& path, const std::vector<CaptionRecord>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw CaptionError("cannot write captions file '" + path.string() + "'");
  for (const auto& r : records) {
    nlohmann::json j = {{"id", r.id},
                        {"caption", r.caption},
                        {"source_modality", r.source_modality ? std::string(templ::modality_name(*r.source_modality)) : "TEXT"},
                        {"asset_ref", r.asset_ref}};
    out << j.dump() << "\n";
  }
}

}  // namespace spider::forge
