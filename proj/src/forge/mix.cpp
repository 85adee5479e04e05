#include "spider/forge/mix.hpp"

#include <cmath>
#include <stdexcept>

namespace spider::forge {

namespace {

// Proportions are kept in per-mille so the transcription is exact integers.
StageMix from_per_mille(int stage, const std::vector<std::pair<std::string, int>>& rows) {
  StageMix mix{stage, {}};
  for (const auto& [name, pm] : rows) mix.entries.emplace_back(name, pm / 1000.0);
  mix.validate();
  return mix;
}

}  // namespace

void StageMix::validate() const {
  if (entries.empty()) throw std::invalid_argument("stage mix has no entries");
  double sum = 0.0;
  for (const auto& [name, p] : entries) {
    if (!(p > 0.0)) throw std::invalid_argument("stage mix proportion for '" + name + "' is not positive");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument("stage " + std::to_string(stage) + " proportions sum to " + std::to_string(sum));
  }
}

double StageMix::proportion(const std::string& name) const {
  for (const auto& [n, p] : entries) {
    if (n == name) return p;
  }
  return 0.0;
}

const std::vector<std::string>& stage1_dataset_names() {
  static const std::vector<std::string> names = {"cc3m-i2t",    "webvid-v2t",  "audiocap-a2t", "cc3m-t2i",
                                                 "webvid-t2v",  "audiocap-t2a", "coco-i2b",    "coco-i2m"};
  return names;
}

const StageMix& stage_mix(int stage) {
  static const StageMix s1 = from_per_mille(1, {{"cc3m-i2t", 100},
                                                {"webvid-v2t", 100},
                                                {"audiocap-a2t", 100},
                                                {"cc3m-t2i", 200},
                                                {"webvid-t2v", 200},
                                                {"audiocap-t2a", 100},
                                                {"coco-i2b", 100},
                                                {"coco-i2m", 100}});
  static const StageMix s2 = from_per_mille(2, {{"t2txs-t2i", 100},
                                                {"t2txs-t2v", 100},
                                                {"t2txs-t2a", 100},
                                                {"x2txs-i2t", 200},
                                                {"x2txs-v2t", 200},
                                                {"x2txs-a2t", 100},
                                                {"x2txs-i2b", 100},
                                                {"x2txs-i2m", 100}});
  static const StageMix s3 = from_per_mille(3, {{"t2txs-t2i", 30},
                                                {"t2txs-t2v", 30},
                                                {"t2txs-t2a", 30},
                                                {"x2txs-i2t", 60},
                                                {"x2txs-v2t", 60},
                                                {"x2txs-a2t", 30},
                                                {"x2txs-i2b", 30},
                                                {"x2txs-i2m", 30},
                                                {"smmi", 500},
                                                {"spmi", 100},
                                                {"tgi", 100}});
  switch (stage) {
    case 1: return s1;
    case 2: return s2;
    case 3: return s3;
    default: throw std::invalid_argument("stage must be 1, 2 or 3, got " + std::to_string(stage));
  }
}

const std::string& stage_sampler_next(const StageMix& mix, numerics::Rng& rng) {
  mix.validate();
  const double u = rng.uniform();
  double acc = 0.0;
  for (const auto& [name, p] : mix.entries) {
    acc += p;
    if (u < acc) return name;
  }
  // Rounding can leave the cumulative sum just under 1.
  return mix.entries.back().first;
}

}  // namespace spider::forge
