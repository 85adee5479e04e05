#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "spider/forge/captions.hpp"
#include "spider/forge/flavors.hpp"
#include "spider/numerics/random.hpp"
#include "spider/pipeline/pipeline.hpp"

namespace spider::forge {

class ForgeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One (question, answer) training pair.
struct TmmInstance {
  std::string question;
  std::string answer;
  std::string flavor;
  /// Source record id, or ids joined with "+" for multi-sample flavors.
  std::string sample_id;
  /// Group modalities the instruction asked for, in order. Not serialized.
  std::vector<Modality> expected_modalities;
};

/// Single-record instance. Throws ForgeError when the record's source
/// modality or the template's input modality does not fit the flavor.
TmmInstance build_instance(Flavor flavor, const CaptionRecord& record, const InstructionTemplate& t);

/// Travel-guide instance for one city.
TmmInstance build_tgi_instance(const std::string& city, const InstructionTemplate& t);

/// Instance requesting `modalities[i]` with the caption of `records[i]`.
/// SmMI lists the requests with a multi-request template; SpMI embeds the
/// answer skeleton in the question. Throws ForgeError when k < 2 or the
/// sizes differ.
TmmInstance concat_multi_sample(Flavor flavor, const std::vector<CaptionRecord>& records,
                                const std::vector<Modality>& modalities, numerics::Rng& rng);

/// `count` instances, each pairing a drawn sample with a drawn instruction.
/// Identical inputs give identical output. `pool` replaces the built-in
/// instruction pool; it is rejected for the multi-sample flavors. Throws
/// ForgeError when no source record fits the flavor or the pool is empty.
std::vector<TmmInstance> build_dataset(Flavor flavor, std::size_t count, std::uint64_t seed,
                                       const std::vector<CaptionRecord>& sources,
                                       const std::vector<InstructionTemplate>* pool = nullptr);

std::string to_jsonl_line(const TmmInstance& inst);
void write_dataset_jsonl(const std::filesystem::path& path, const std::vector<TmmInstance>& instances);
/// (question, answer) pairs from a TMM or pseudo JSONL file.
std::vector<std::pair<std::string, std::string>> read_pairs_jsonl(const std::filesystem::path& path);

struct RealizedAsset {
  Modality modality = Modality::Image;
  std::string asset_ref;
};

struct PseudoRecord {
  std::string question;
  std::string answer;
  std::vector<RealizedAsset> realized_assets;
};

/// Forges `count` questions and runs each through the pipeline. A failing
/// question aborts with ForgeError naming it.
std::vector<PseudoRecord> emit_pseudo_dataset(Flavor flavor, std::size_t count, std::uint64_t seed,
                                              const std::vector<CaptionRecord>& sources,
                                              const pipeline::PipelineContext& ctx);

std::string to_jsonl_line(const PseudoRecord& rec);
void write_pseudo_jsonl(const std::filesystem::path& path, const std::vector<PseudoRecord>& records);

}  // namespace spider::forge
