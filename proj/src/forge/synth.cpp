#include "spider/forge/synth.hpp"

#include <array>
#include <cstdio>
#include <set>
#include <stdexcept>
#include <string_view>

namespace spider::forge {

namespace {

constexpr std::array<std::string_view, 12> kAdjectives{"fluffy", "tiny",   "small",  "playful", "sleepy", "curious",
                                                       "noisy",  "gentle", "spotted", "young",  "lazy",   "proud"};
constexpr std::array<std::string_view, 16> kNouns{"cat",   "dog",    "horse", "parrot", "rabbit", "fox",
                                                  "goat",  "owl",    "turtle", "lamb",  "duck",   "deer",
                                                  "otter", "kitten", "puppy",  "swan"};
constexpr std::array<std::string_view, 10> kActions{"is sitting",  "is running",  "is sleeping", "is eating",
                                                    "is jumping",  "is playing",  "is resting",  "is walking",
                                                    "is drinking", "is hiding"};
constexpr std::array<std::string_view, 12> kPlaces{
    "on a couch",        "in a garden",         "by the river",      "under a tree",
    "on a wooden bench", "in the snow",         "on a sandy beach",  "inside a barn",
    "near a fountain",   "on a mountain trail", "in a city square",  "beside a campfire"};
constexpr std::array<std::string_view, 10> kColors{"red",   "blue",  "green", "yellow", "white",
                                                   "black", "brown", "grey",  "orange", "purple"};
constexpr std::array<std::string_view, 8> kPositions{"on the left",     "on the right",   "in the center",
                                                     "in the foreground", "in the background", "at the top",
                                                     "at the bottom",   "near the corner"};

std::string id_of(std::string_view prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*s_%04zu", static_cast<int>(prefix.size()), prefix.data(), i);
  return buf;
}

// Draws `n` distinct indices in [0, space).
std::vector<std::size_t> distinct_draws(numerics::Rng& rng, std::size_t space, std::size_t n) {
  std::set<std::size_t> seen;
  std::vector<std::size_t> out;
  while (out.size() < n) {
    const std::size_t k = rng.uniform_index(space);
    if (seen.insert(k).second) out.push_back(k);
  }
  return out;
}

std::string scene(std::size_t k) {
  const auto adj = kAdjectives[k % kAdjectives.size()];
  k /= kAdjectives.size();
  const auto noun = kNouns[k % kNouns.size()];
  k /= kNouns.size();
  const auto act = kActions[k % kActions.size()];
  k /= kActions.size();
  const auto place = kPlaces[k % kPlaces.size()];
  return std::string(adj) + " " + std::string(noun) + " " + std::string(act) + " " + std::string(place);
}

std::string object_phrase(std::size_t k) {
  const auto color = kColors[k % kColors.size()];
  k /= kColors.size();
  const auto noun = kNouns[k % kNouns.size()];
  k /= kNouns.size();
  return "the " + std::string(color) + " " + std::string(noun) + " " + std::string(kPositions[k % kPositions.size()]);
}

}  // namespace

SyntheticCorpus synthesize_corpus(std::uint64_t seed, std::size_t per_modality) {
  constexpr std::size_t kSceneSpace = kAdjectives.size() * kNouns.size() * kActions.size() * kPlaces.size();
  constexpr std::size_t kObjectSpace = kColors.size() * kNouns.size() * kPositions.size();
  if (per_modality == 0 || per_modality > kObjectSpace) {
    throw std::invalid_argument("per_modality must be in [1, " + std::to_string(kObjectSpace) + "]");
  }
  const numerics::Rng root(seed);
  SyntheticCorpus corpus;
  auto add = [&corpus](std::string id, std::string caption, Modality m, std::string asset_ref) {
    corpus.gallery.push_back({id, m, caption});
    corpus.captions.push_back({std::move(id), std::move(caption), m, std::move(asset_ref)});
  };

  struct SceneSource {
    std::string_view prefix;
    Modality modality;
    std::string_view lead;
    std::string_view tail;
  };
  for (const SceneSource& s : {SceneSource{"img", Modality::Image, "A ", ""},
                               SceneSource{"vid", Modality::Video, "A ", ", filmed in slow motion"},
                               SceneSource{"aud", Modality::Audio, "The sound of a ", " while birds chirp"}}) {
    numerics::Rng rng = root.substream("synth." + std::string(s.prefix));
    const auto picks = distinct_draws(rng, kSceneSpace, per_modality);
    for (std::size_t i = 0; i < per_modality; ++i) {
      const std::string id = id_of(s.prefix, i);
      add(id, std::string(s.lead) + scene(picks[i]) + std::string(s.tail), s.modality, id);
    }
  }
  for (const auto& [prefix, m] : {std::pair<std::string_view, Modality>{"box", Modality::Box},
                                  std::pair<std::string_view, Modality>{"mask", Modality::Mask}}) {
    numerics::Rng rng = root.substream("synth." + std::string(prefix));
    const auto picks = distinct_draws(rng, kObjectSpace, per_modality);
    for (std::size_t i = 0; i < per_modality; ++i) {
      add(id_of(prefix, i), object_phrase(picks[i]), m, id_of("img", i));
    }
  }
  return corpus;
}

}  // namespace spider::forge
