#include "spider/forge/flavors.hpp"

#include <set>
#include <stdexcept>

namespace spider::forge {

namespace {

using templ::TaskPrompt;

constexpr Modality I = Modality::Image;
constexpr Modality A = Modality::Audio;
constexpr Modality V = Modality::Video;
constexpr Modality B = Modality::Box;
constexpr Modality M = Modality::Mask;

struct Combo {
  std::vector<Modality> targets;
  std::string phrase;
};

std::string replace_marker(std::string s, std::string_view marker, std::string_view with) {
  for (std::size_t at = s.find(marker); at != std::string::npos; at = s.find(marker, at + with.size())) {
    s.replace(at, marker.size(), with);
  }
  return s;
}

TaskPrompt task_for(const std::vector<Modality>& targets) {
  return targets.size() == 1 ? templ::single_modal_task(targets[0]) : TaskPrompt::SmartMultimodal;
}

std::string_view noun_of(Modality m) {
  switch (m) {
    case Modality::Image: return "image";
    case Modality::Audio: return "audio clip";
    case Modality::Video: return "video";
    default: return "picture";
  }
}

// Leads carry "<m>" for the requested-modality phrase and "{}" for content.
const std::vector<std::string> kT2xLeads = {
    "Please generate <m> based on the following text: {}",
    "Create <m> for this description: {}",
    "Show me <m> that matches: {}",
    "I would like <m> depicting the following: {}",
    "Can you produce <m> of this scene: {}",
    "Make <m> from the text below: {}",
};

std::vector<Combo> t2x_combos(Modality primary) {
  switch (primary) {
    case Modality::Image:
      return {{{I}, "an image"},
              {{I, V}, "an image and a video"},
              {{I, A}, "an image and an audio clip"},
              {{I, A, V}, "an image, an audio clip and a video"}};
    case Modality::Video:
      return {{{V}, "a video"},
              {{I, V}, "an image and a video"},
              {{V, A}, "a video and an audio clip"},
              {{I, A, V}, "an image, an audio clip and a video"}};
    default:
      return {{{A}, "an audio clip"},
              {{A, I}, "an audio clip and an image"},
              {{A, V}, "an audio clip and a video"},
              {{I, A, V}, "an image, an audio clip and a video"}};
  }
}

std::vector<InstructionTemplate> t2x_pool(Modality primary) {
  std::vector<InstructionTemplate> pool;
  for (const auto& lead : kT2xLeads) {
    for (const auto& c : t2x_combos(primary)) {
      InstructionTemplate t;
      t.pattern = replace_marker(lead, "<m>", c.phrase);
      t.task_prompt = task_for(c.targets);
      t.target_modalities = c.targets;
      pool.push_back(std::move(t));
    }
  }
  return pool;
}

const std::vector<std::string> kX2tTextPatterns = {
    "Describe this <n>. Hint: {}",
    "Write a caption for this <n>, which is about {}",
    "Tell me what this <n> contains. Context: {}",
    "Summarize this <n> in one sentence, mentioning {}",
    "Give a short description of this <n> about {}",
};

const std::vector<std::string> kX2tGenerativeLeads = {
    "Based on this <n>, generate <m> about {}",
    "Turn this <n> into <m> showing {}",
    "Using this <n> as reference, create <m> of {}",
};

const std::vector<Combo> kX2tCombos = {{{I}, "an image"},
                                       {{A}, "an audio clip"},
                                       {{V}, "a video"},
                                       {{I, A, V}, "an image, an audio clip and a video"}};

std::vector<InstructionTemplate> x2t_pool(Modality input) {
  std::vector<InstructionTemplate> pool;
  for (const auto& p : kX2tTextPatterns) {
    InstructionTemplate t;
    t.pattern = replace_marker(p, "<n>", noun_of(input));
    t.task_prompt = TaskPrompt::Text;
    t.requires_input_modality = input;
    pool.push_back(std::move(t));
  }
  for (const auto& lead : kX2tGenerativeLeads) {
    for (const auto& c : kX2tCombos) {
      InstructionTemplate t;
      t.pattern = replace_marker(replace_marker(lead, "<n>", noun_of(input)), "<m>", c.phrase);
      t.task_prompt = task_for(c.targets);
      t.target_modalities = c.targets;
      t.requires_input_modality = input;
      pool.push_back(std::move(t));
    }
  }
  return pool;
}

// "<s>" is the suffix that adds further generated modalities.
std::vector<InstructionTemplate> grounding_pool(const std::vector<std::string>& leads, const std::vector<Combo>& combos) {
  std::vector<InstructionTemplate> pool;
  for (const auto& lead : leads) {
    for (const auto& c : combos) {
      InstructionTemplate t;
      t.pattern = replace_marker(lead, "<s>", c.phrase);
      t.task_prompt = task_for(c.targets);
      t.target_modalities = c.targets;
      t.requires_input_modality = Modality::Image;
      pool.push_back(std::move(t));
    }
  }
  return pool;
}

std::vector<InstructionTemplate> i2b_pool() {
  return grounding_pool({"Detect {}<s>", "Locate {} in this picture<s>", "Draw a bounding box around {}<s>",
                         "Mark where {} is<s>", "Put a box on {}<s>", "Show the position of {}<s>"},
                        {{{B}, ""},
                         {{B, I}, ", and generate an image for it"},
                         {{B, I, V}, ", and generate an image and a video for it"}});
}

std::vector<InstructionTemplate> i2m_pool() {
  return grounding_pool({"Give me the mask of {}<s>", "Segment {} in this image<s>",
                         "Produce a segmentation mask for {}<s>", "Cut out {} from this picture<s>"},
                        {{{M}, ""},
                         {{M, I}, ", and generate an image for it"},
                         {{M, V}, ", and generate a video for it"},
                         {{M, I, A}, ", and generate an image and an audio clip for it"}});
}

std::vector<MultiRequestTemplate> smmi_pool() {
  const std::vector<std::string> leads = {
      "Please generate the following: ", "I need several things: ",          "Create all of these for me: ",
      "Produce the following contents: ", "Help me make these: ",            "Generate each of the following: ",
  };
  const std::vector<std::vector<std::pair<Modality, std::string>>> phrase_sets = {
      {{I, "an image of {}"}, {A, "an audio clip of {}"}, {V, "a video of {}"}},
      {{I, "a picture showing {}"}, {A, "a sound recording of {}"}, {V, "a video clip showing {}"}},
      {{I, "a photo of {}"}, {A, "the sound of {}"}, {V, "footage of {}"}},
      {{I, "an illustration of {}"}, {A, "audio for {}"}, {V, "an animation of {}"}},
  };
  std::vector<MultiRequestTemplate> pool;
  for (const auto& lead : leads) {
    for (const auto& set : phrase_sets) {
      MultiRequestTemplate t;
      t.lead = lead;
      t.segment_patterns = set;
      pool.push_back(std::move(t));
    }
  }
  return pool;
}

std::vector<InstructionTemplate> spmi_pool() {
  std::vector<InstructionTemplate> pool;
  for (const char* p : {"Generate the contents in this answer format: {}", "Please respond following this format exactly: {}",
                        "Answer using the structure below: {}", "Fill in this layout: {}", "Follow this output format: {}"}) {
    InstructionTemplate t;
    t.pattern = p;
    t.task_prompt = TaskPrompt::SpecificMultimodal;
    t.content_is_skeleton = true;
    pool.push_back(std::move(t));
  }
  return pool;
}

std::vector<InstructionTemplate> tgi_pool() {
  std::vector<InstructionTemplate> pool;
  for (const char* p : {"Please provide me a travel guide for {}", "Plan a trip to {} with pictures, sounds and a video",
                        "Give me a many-modal travel guide for {}", "I am visiting {}, show me what to expect",
                        "Create a travel guide for {} with an image, audio and a video",
                        "What should I see in {}? Include an image, an audio clip and a video"}) {
    InstructionTemplate t;
    t.pattern = p;
    t.task_prompt = TaskPrompt::SmartMultimodal;
    t.target_modalities = {I, A, V};
    t.t_prompt_formats = {"a scenic landmark view of {}", "ambient street sounds of {}", "a travel video touring {}"};
    t.lead_format = "Here is a travel guide for {}.";
    pool.push_back(std::move(t));
  }
  return pool;
}

struct Registry {
  std::array<std::vector<InstructionTemplate>, kFlavorCount> pools;
  std::vector<MultiRequestTemplate> multi;

  Registry() {
    pools[0] = t2x_pool(I);
    pools[1] = t2x_pool(V);
    pools[2] = t2x_pool(A);
    pools[3] = x2t_pool(I);
    pools[4] = x2t_pool(V);
    pools[5] = x2t_pool(A);
    pools[6] = i2b_pool();
    pools[7] = i2m_pool();
    multi = smmi_pool();
    pools[9] = spmi_pool();
    pools[10] = tgi_pool();
    for (Flavor f : kAllFlavors) {
      const std::size_t n = f == Flavor::SmMI ? multi.size() : pools[static_cast<std::size_t>(f)].size();
      if (n != flavor_info(f).pool_size) {
        throw std::logic_error("instruction pool size mismatch for " + std::string(flavor_name(f)));
      }
      for (const auto& t : pools[static_cast<std::size_t>(f)]) t.validate();
    }
    for (const auto& m : multi) m.validate();
  }
};

const Registry& registry() {
  static const Registry r;
  return r;
}

constexpr std::array<std::string_view, kFlavorCount> kNames{
    "t2txs-t2i", "t2txs-t2v", "t2txs-t2a", "x2txs-i2t", "x2txs-v2t", "x2txs-a2t",
    "x2txs-i2b", "x2txs-i2m", "smmi",      "spmi",      "tgi"};

}  // namespace

std::string_view flavor_name(Flavor f) noexcept { return kNames[static_cast<std::size_t>(f)]; }

std::optional<Flavor> parse_flavor(std::string_view name) noexcept {
  for (Flavor f : kAllFlavors) {
    if (flavor_name(f) == name) return f;
  }
  return std::nullopt;
}

const FlavorInfo& flavor_info(Flavor f) {
  static const std::array<FlavorInfo, kFlavorCount> info{{
      {I, std::nullopt, 24, 2000, false},
      {V, std::nullopt, 24, 2000, false},
      {A, std::nullopt, 24, 2000, false},
      {I, I, 17, 2000, false},
      {V, V, 17, 2000, false},
      {A, A, 17, 2000, false},
      {B, I, 18, 2000, false},
      {M, I, 16, 2000, false},
      {V, std::nullopt, 24, 2000, true},
      {V, std::nullopt, 5, 2000, true},
      {std::nullopt, std::nullopt, 6, 1000, false},
  }};
  return info[static_cast<std::size_t>(f)];
}

const std::vector<InstructionTemplate>& instruction_pool(Flavor f) {
  return registry().pools[static_cast<std::size_t>(f)];
}

const std::vector<MultiRequestTemplate>& multi_request_pool() { return registry().multi; }

pipeline::Planner default_planner() {
  pipeline::Planner planner;
  for (Flavor f : kAllFlavors) {
    for (const auto& t : instruction_pool(f)) planner.add(t);
  }
  for (const auto& m : multi_request_pool()) planner.add(m);
  return planner;
}

nlohmann::json pool_to_json(const std::vector<InstructionTemplate>& pool) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& t : pool) {
    nlohmann::json targets = nlohmann::json::array();
    for (Modality m : t.target_modalities) targets.push_back(templ::modality_name(m));
    out.push_back({{"pattern", t.pattern},
                   {"task_prompt", templ::task_prompt_name(t.task_prompt)},
                   {"target_modalities", targets},
                   {"requires_input_modality", t.requires_input_modality
                                                   ? nlohmann::json(templ::modality_name(*t.requires_input_modality))
                                                   : nlohmann::json(nullptr)},
                   {"t_prompt_formats", t.t_prompt_formats},
                   {"lead_format", t.lead_format},
                   {"content_is_skeleton", t.content_is_skeleton}});
  }
  return out;
}

std::vector<InstructionTemplate> pool_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw std::invalid_argument("instruction pool must be a JSON array");
  auto modality = [](const nlohmann::json& v) {
    const auto m = templ::parse_modality(v.get<std::string>());
    if (!m) throw std::invalid_argument("unknown modality '" + v.get<std::string>() + "'");
    return *m;
  };
  std::vector<InstructionTemplate> pool;
  for (std::size_t i = 0; i < j.size(); ++i) {
    try {
      const auto& e = j.at(i);
      InstructionTemplate t;
      t.pattern = e.at("pattern").get<std::string>();
      const std::string task = e.at("task_prompt").get<std::string>();
      const auto tp = templ::parse_task_prompt_name(task);
      if (!tp) throw std::invalid_argument("unknown task prompt '" + task + "'");
      t.task_prompt = *tp;
      if (e.contains("target_modalities")) {
        for (const auto& m : e.at("target_modalities")) t.target_modalities.push_back(modality(m));
      }
      if (e.contains("requires_input_modality") && !e.at("requires_input_modality").is_null()) {
        t.requires_input_modality = modality(e.at("requires_input_modality"));
      }
      if (e.contains("t_prompt_formats")) t.t_prompt_formats = e.at("t_prompt_formats").get<std::vector<std::string>>();
      if (e.contains("lead_format")) t.lead_format = e.at("lead_format").get<std::string>();
      if (e.contains("content_is_skeleton")) t.content_is_skeleton = e.at("content_is_skeleton").get<bool>();
      t.validate();
      pool.push_back(std::move(t));
    } catch (const std::exception& ex) {
      throw std::invalid_argument("instruction pool entry " + std::to_string(i) + ": " + ex.what());
    }
  }
  return pool;
}

const std::vector<std::string>& city_names() {
  static const std::vector<std::string> names = [] {
    const std::array<std::string_view, 40> heads{
        "Ash",  "Bel",  "Cor",  "Dun",  "Elm",  "Fair", "Glen",   "Hart", "Iver", "Kings",
        "Lang", "Mar",  "Nor",  "Oak",  "Pem",  "Quen", "Ros",    "Stan", "Thorn", "Ulver",
        "Val",  "Wester", "Yar", "Zel", "Bram", "Cal",  "Dray",   "Ever", "Fen",  "Gold",
        "Hol",  "Kel",  "Lyn",  "Mill", "New",  "Oster", "Pol",   "Red",  "Sil",  "Tal"};
    const std::array<std::string_view, 25> tails{
        "ford", "haven", "port", "bridge", "mouth", "field", "wick",  "by",    "ton",  "stead", "holm", "mere", "gate",
        "wood", "dale",  "burgh", "crest", "vale",  "minster", "ley", "shire", "cliff", "moor", "bay",  "fall"};
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (auto h : heads) {
      for (auto t : tails) {
        std::string name = std::string(h) + std::string(t);
        if (!seen.insert(name).second) throw std::logic_error("duplicate city name " + name);
        out.push_back(std::move(name));
      }
    }
    return out;
  }();
  return names;
}

}  // namespace spider::forge
