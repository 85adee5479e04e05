#include "spider/forge/dataset.hpp"

#include <fstream>

#include <json.hpp>

#include "spider/templ/template.hpp"

namespace spider::forge {

namespace {

using nlohmann::ordered_json;
using templ::QuestionMessage;

std::string serialize_or_throw(const QuestionMessage& q) {
  try {
    return templ::serialize_question(q);
  } catch (const std::exception& e) {
    throw ForgeError(std::string("cannot serialize question: ") + e.what());
  }
}

std::string serialize_or_throw(const templ::AnswerMessage& a) {
  try {
    return templ::serialize_answer(a);
  } catch (const std::exception& e) {
    throw ForgeError(std::string("cannot serialize answer: ") + e.what());
  }
}

constexpr std::array<Modality, 3> kMultiModalities{Modality::Image, Modality::Audio, Modality::Video};

}  // namespace

TmmInstance build_instance(Flavor flavor, const CaptionRecord& record, const InstructionTemplate& t) {
  const FlavorInfo& info = flavor_info(flavor);
  if (info.multi_sample || !info.source_modality) {
    throw ForgeError(std::string(flavor_name(flavor)) + " instances are not built from a single record");
  }
  if (record.source_modality != info.source_modality || t.requires_input_modality != info.input_modality) {
    throw ForgeError("template/record modality mismatch for " + std::string(flavor_name(flavor)) + " record '" +
                     record.id + "'");
  }
  QuestionMessage q;
  q.task_prompt = t.task_prompt;
  if (info.input_modality) q.input_asset = templ::InputAsset{*info.input_modality, record.asset_ref};
  q.instruction = t.instantiate(record.caption);

  TmmInstance inst;
  inst.question = serialize_or_throw(q);
  inst.answer = serialize_or_throw(pipeline::construct_answer(t, record.caption));
  inst.flavor = flavor_name(flavor);
  inst.sample_id = record.id;
  inst.expected_modalities = t.target_modalities;
  return inst;
}

TmmInstance build_tgi_instance(const std::string& city, const InstructionTemplate& t) {
  if (t.requires_input_modality) throw ForgeError("travel-guide templates take no input asset");
  const QuestionMessage q{t.task_prompt, std::nullopt, t.instantiate(city)};
  TmmInstance inst;
  inst.question = serialize_or_throw(q);
  inst.answer = serialize_or_throw(pipeline::construct_answer(t, city));
  inst.flavor = flavor_name(Flavor::TGI);
  inst.sample_id = "city:" + city;
  inst.expected_modalities = t.target_modalities;
  return inst;
}

TmmInstance concat_multi_sample(Flavor flavor, const std::vector<CaptionRecord>& records,
                                const std::vector<Modality>& modalities, numerics::Rng& rng) {
  if (flavor != Flavor::SmMI && flavor != Flavor::SpMI) {
    throw ForgeError(std::string(flavor_name(flavor)) + " is not a multi-sample flavor");
  }
  if (records.size() < 2) throw ForgeError("multi-sample instances need at least 2 records");
  if (records.size() != modalities.size()) throw ForgeError("one modality per record is required");

  std::vector<std::pair<Modality, std::string>> requests;
  std::string sample_id;
  for (std::size_t i = 0; i < records.size(); ++i) {
    requests.emplace_back(modalities[i], records[i].caption);
    sample_id += (i ? "+" : "") + records[i].id;
  }

  QuestionMessage q;
  if (flavor == Flavor::SmMI) {
    const auto& pool = multi_request_pool();
    const MultiRequestTemplate& t = pool[rng.uniform_index(pool.size())];
    for (const auto& r : records) {
      if (r.caption.find(t.separator) != std::string::npos) {
        throw ForgeError("caption of '" + r.id + "' contains the request separator");
      }
    }
    q = {t.task_prompt, std::nullopt, t.instantiate(requests)};
  } else {
    const auto& pool = instruction_pool(Flavor::SpMI);
    const InstructionTemplate& t = pool[rng.uniform_index(pool.size())];
    std::vector<templ::ModalityGroup> skeleton;
    for (const auto& [m, caption] : requests) skeleton.push_back({"", m, caption, 0});
    q = {t.task_prompt, std::nullopt, t.instantiate(templ::serialize_group_skeleton(skeleton))};
  }

  TmmInstance inst;
  inst.question = serialize_or_throw(q);
  inst.answer = serialize_or_throw(pipeline::construct_multi_answer(requests));
  inst.flavor = flavor_name(flavor);
  inst.sample_id = std::move(sample_id);
  inst.expected_modalities = modalities;
  return inst;
}

std::vector<TmmInstance> build_dataset(Flavor flavor, std::size_t count, std::uint64_t seed,
                                       const std::vector<CaptionRecord>& sources,
                                       const std::vector<InstructionTemplate>* custom_pool) {
  const FlavorInfo& info = flavor_info(flavor);
  if (custom_pool && info.multi_sample) {
    throw ForgeError("custom instruction pools are not supported for " + std::string(flavor_name(flavor)));
  }
  const auto& pool = custom_pool ? *custom_pool : instruction_pool(flavor);
  if (!info.multi_sample && pool.empty()) {
    throw ForgeError("empty instruction pool for " + std::string(flavor_name(flavor)));
  }
  numerics::Rng rng = numerics::Rng(seed).substream("forge." + std::string(flavor_name(flavor)));
  std::vector<TmmInstance> out;
  out.reserve(count);

  if (flavor == Flavor::TGI) {
    const auto& cities = city_names();
    for (std::size_t i = 0; i < count; ++i) {
      out.push_back(build_tgi_instance(cities[i % cities.size()], pool[rng.uniform_index(pool.size())]));
    }
    return out;
  }

  std::vector<const CaptionRecord*> eligible;
  for (const auto& r : sources) {
    if (r.source_modality == info.source_modality) eligible.push_back(&r);
  }
  if (eligible.empty()) {
    throw ForgeError("no source records with modality " + std::string(templ::modality_name(*info.source_modality)) +
                     " for " + std::string(flavor_name(flavor)));
  }

  if (info.multi_sample) {
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t k = 2 + rng.uniform_index(3);
      std::vector<CaptionRecord> picked;
      std::vector<Modality> modalities;
      for (std::size_t j = 0; j < k; ++j) {
        picked.push_back(*eligible[rng.uniform_index(eligible.size())]);
        modalities.push_back(kMultiModalities[rng.uniform_index(kMultiModalities.size())]);
      }
      out.push_back(concat_multi_sample(flavor, picked, modalities, rng));
    }
    return out;
  }

  for (std::size_t i = 0; i < count; ++i) {
    const CaptionRecord& rec = *eligible[rng.uniform_index(eligible.size())];
    out.push_back(build_instance(flavor, rec, pool[rng.uniform_index(pool.size())]));
  }
  return out;
}

std::string to_jsonl_line(const TmmInstance& inst) {
  ordered_json j;
  j["question"] = inst.question;
  j["answer"] = inst.answer;
  j["flavor"] = inst.flavor;
  j["sample_id"] = inst.sample_id;
  return j.dump();
}

void write_dataset_jsonl(const std::filesystem::path& path, const std::vector<TmmInstance>& instances) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ForgeError("cannot write '" + path.string() + "'");
  for (const auto& inst : instances) out << to_jsonl_line(inst) << "\n";
  if (!out) throw ForgeError("write failed for '" + path.string() + "'");
}

std::vector<std::pair<std::string, std::string>> read_pairs_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ForgeError("cannot open '" + path.string() + "'");
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      out.emplace_back(j.at("question").get<std::string>(), j.at("answer").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      throw ForgeError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::vector<PseudoRecord> emit_pseudo_dataset(Flavor flavor, std::size_t count, std::uint64_t seed,
                                              const std::vector<CaptionRecord>& sources,
                                              const pipeline::PipelineContext& ctx) {
  const auto instances = build_dataset(flavor, count, seed, sources);
  std::vector<PseudoRecord> out;
  out.reserve(instances.size());
  for (const auto& inst : instances) {
    pipeline::PipelineResult result;
    try {
      result = pipeline::run_pipeline(inst.question, ctx);
    } catch (const std::exception& e) {
      throw ForgeError("pipeline failed for question '" + inst.question + "': " + e.what());
    }
    PseudoRecord rec{inst.question, serialize_or_throw(result.answer), {}};
    for (const auto& r : result.realized) rec.realized_assets.push_back({r.modality, r.asset_ref});
    out.push_back(std::move(rec));
  }
  return out;
}

std::string to_jsonl_line(const PseudoRecord& rec) {
  ordered_json j;
  j["question"] = rec.question;
  j["answer"] = rec.answer;
  j["realized_assets"] = ordered_json::array();
  for (const auto& a : rec.realized_assets) {
    ordered_json r;
    r["modality"] = templ::modality_name(a.modality);
    r["asset_ref"] = a.asset_ref;
    j["realized_assets"].push_back(std::move(r));
  }
  return j.dump();
}

void write_pseudo_jsonl(const std::filesystem::path& path, const std::vector<PseudoRecord>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ForgeError("cannot write '" + path.string() + "'");
  for (const auto& r : records) out << to_jsonl_line(r) << "\n";
  if (!out) throw ForgeError("write failed for '" + path.string() + "'");
}

}  // namespace spider::forge
