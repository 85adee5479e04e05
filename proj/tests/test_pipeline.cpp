#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "spider/numerics/random.hpp"
#include "spider/pipeline/pipeline.hpp"
#include "spider/templ/template.hpp"

using namespace spider::pipeline;
using spider::controller::Controller;
using spider::controller::ControllerConfig;
using spider::numerics::Rng;
using spider::templ::TaskPrompt;

namespace {

const std::string kCat = "A cat is sitting on a couch";

ControllerConfig default_config() { return ControllerConfig{}; }

std::vector<GalleryEntry> small_entries() {
  return {{"img_cat", Modality::Image, kCat},
          {"img_dog", Modality::Image, "A dog is running in a park"},
          {"img_owl", Modality::Image, "An owl is resting on a branch"},
          {"vid_cat", Modality::Video, kCat},
          {"vid_sea", Modality::Video, "Waves are breaking on a rocky shore"},
          {"aud_rain", Modality::Audio, "Rain is falling on a tin roof"},
          {"box_cup", Modality::Box, "the blue cup on the left"},
          {"mask_cup", Modality::Mask, "the blue cup on the left"}};
}

InstructionTemplate image_video_template() {
  InstructionTemplate t;
  t.pattern = "Please generate an image and a video based on the following text: {}";
  t.task_prompt = TaskPrompt::SmartMultimodal;
  t.target_modalities = {Modality::Image, Modality::Video};
  return t;
}

// Independent reference for the decoder: plain loops over the gallery.
std::string brute_force_decode(Modality m, const Tensor& s, const AssetGallery& g) {
  double s_norm = 0.0;
  for (double v : s.data()) s_norm += v * v;
  s_norm = std::sqrt(s_norm);
  std::string best;
  double best_score = -2.0;
  for (const auto& rec : g.records()) {
    if (rec.modality != m) continue;
    double d = 0.0, n = 0.0;
    for (std::size_t i = 0; i < s.data().size(); ++i) {
      d += s.data()[i] * rec.target_embedding.data()[i];
      n += rec.target_embedding.data()[i] * rec.target_embedding.data()[i];
    }
    const double score = d / (s_norm * std::sqrt(n));
    if (score > best_score || (score == best_score && rec.asset_ref < best)) {
      best_score = score;
      best = rec.asset_ref;
    }
  }
  return best;
}

}  // namespace

TEST_CASE("mock encoders are deterministic, unit-norm and reject blank text") {
  const MockEncoders enc(7, 64, 32);
  const Tensor a = enc.encode_text(kCat);
  CHECK(a.rows() == 1);
  CHECK(a.cols() == 32);
  CHECK(a.same_values(MockEncoders(7, 64, 32).encode_text(kCat)));
  CHECK(spider::numerics::l2_norm(a.data()) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_FALSE(a.same_values(enc.encode_text("A cat is sitting on a chair")));
  CHECK_FALSE(a.same_values(MockEncoders(8, 64, 32).encode_text(kCat)));
  // Word order matters through the bigram features.
  CHECK_FALSE(enc.encode_text("dog bites man").same_values(enc.encode_text("man bites dog")));
  CHECK_THROWS_AS((void)enc.encode_text("   "), std::invalid_argument);

  const Tensor e = enc.encode_modality("img_0001", Modality::Image);
  CHECK(e.cols() == 64);
  CHECK(spider::numerics::l2_norm(e.data()) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_FALSE(e.same_values(enc.encode_modality("img_0001", Modality::Video)));

  const spider::templ::QuestionMessage q{TaskPrompt::Image, std::nullopt, "draw a cat"};
  const spider::templ::ModalityGroup g{"", Modality::Image, "a cat", 0};
  const Tensor h = enc.mock_llm_hidden(q, g, 3);
  REQUIRE(h.rows() == 3);
  for (std::size_t c = 0; c < h.cols(); ++c) {
    CHECK(h(0, c) == h(1, c));
    CHECK(h(0, c) == h(2, c));
  }
  const spider::templ::ModalityGroup gv{"", Modality::Video, "a cat", 0};
  CHECK_FALSE(h.same_values(enc.mock_llm_hidden(q, gv, 3)));
}

TEST_CASE("gallery construction rejects collisions") {
  const MockEncoders enc(1, 16, 8);
  CHECK(AssetGallery(small_entries(), enc).size() == 8);

  auto dup_ref = small_entries();
  dup_ref.push_back({"img_cat", Modality::Audio, "something else entirely"});
  CHECK_THROWS_AS(AssetGallery(dup_ref, enc), GalleryError);

  auto blank = small_entries();
  blank.push_back({"img_blank", Modality::Image, "  "});
  CHECK_THROWS_AS(AssetGallery(blank, enc), GalleryError);

  auto same_text = small_entries();
  same_text.push_back({"img_cat2", Modality::Image, "A  cat is sitting on a couch"});
  CHECK_THROWS_AS(AssetGallery(same_text, enc), GalleryError);

  const AssetGallery g(small_entries(), enc);
  CHECK(g.contains("vid_sea"));
  CHECK_FALSE(g.contains("vid_none"));
  CHECK_THROWS_AS((void)g.at("vid_none"), GalleryError);
  CHECK(g.of_modality(Modality::Image).size() == 3);
  CHECK(g.at("vid_cat").target_embedding.same_values(enc.encode_text(kCat)));
}

TEST_CASE("gallery JSONL round trip and line-numbered errors") {
  const MockEncoders enc(1, 16, 8);
  const auto path = std::filesystem::temp_directory_path() / "spider_test_gallery.jsonl";
  write_gallery_jsonl(path, small_entries());
  const AssetGallery g = AssetGallery::load_jsonl(path, enc);
  CHECK(g.size() == 8);
  CHECK(g.at("aud_rain").caption == "Rain is falling on a tin roof");

  {
    std::ofstream out(path);
    out << R"({"asset_ref": "a", "modality": "IMAGE", "caption": "x"})" << "\n";
    out << R"({"asset_ref": "b", "modality": "SMELL", "caption": "y"})" << "\n";
  }
  try {
    (void)AssetGallery::load_jsonl(path, enc);
    FAIL("expected GalleryError");
  } catch (const GalleryError& e) {
    CHECK(std::string(e.what()).find(":2") != std::string::npos);
  }
  std::filesystem::remove(path);
}

TEST_CASE("decode agrees with a brute-force scan on 1000 random embeddings") {
  const MockEncoders enc(3, 16, 8);
  std::vector<GalleryEntry> entries;
  const char* words[] = {"red", "blue", "quick", "slow", "cat", "dog", "river", "hill", "sings", "runs"};
  Rng words_rng(11);
  for (std::size_t i = 0; i < 60; ++i) {
    std::string caption = "item " + std::to_string(i);
    for (int w = 0; w < 4; ++w) caption += std::string(" ") + words[words_rng.uniform_index(10)];
    entries.push_back({"a" + std::to_string(i), spider::templ::kAllModalities[i % 5], caption});
  }
  const AssetGallery g(entries, enc);
  Rng rng(99);
  std::size_t agree = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    Tensor s(1, 8);
    for (double& v : s.data()) v = rng.normal();
    const Modality m = spider::templ::kAllModalities[rng.uniform_index(5)];
    if (decode_modality(m, s, g).asset_ref == brute_force_decode(m, s, g)) ++agree;
  }
  CHECK(agree == 1000);
}

TEST_CASE("decode returns an exact caption match with score 1 and fails on an empty modality") {
  const MockEncoders enc(3, 16, 8);
  const AssetGallery g(small_entries(), enc);
  const Decoded d = decode_modality(Modality::Image, enc.encode_text("An owl is resting on a branch"), g);
  CHECK(d.asset_ref == "img_owl");
  CHECK(d.score >= 1.0 - 1e-12);

  const AssetGallery images_only({{"only", Modality::Image, "just an image"}}, enc);
  CHECK_THROWS_AS((void)decode_modality(Modality::Audio, enc.encode_text("x"), images_only), GalleryError);
}

TEST_CASE("instruction templates validate, instantiate and match") {
  const InstructionTemplate t = image_video_template();
  CHECK_NOTHROW(t.validate());
  CHECK(t.instantiate(kCat) == "Please generate an image and a video based on the following text: " + kCat);
  CHECK(t.match(t.instantiate(kCat)) == kCat);
  CHECK_FALSE(t.match("Please generate an image based on the following text: x").has_value());
  CHECK_FALSE(t.match("Please generate an image and a video based on the following text: ").has_value());

  InstructionTemplate bad = t;
  bad.pattern = "no placeholder";
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad.pattern = "{} and {}";
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = t;
  bad.task_prompt = TaskPrompt::Image;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = t;
  bad.target_modalities.clear();
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = t;
  bad.task_prompt = TaskPrompt::Text;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("answer construction follows the lead-text rule") {
  const auto a = construct_answer(image_video_template(), kCat);
  CHECK(spider::templ::serialize_answer(a) ==
        "[OUT] A cat is sitting on a couch. <IMAGE> A cat is sitting on a couch [IMAGE_0] </IMAGE>. <VIDEO> A cat "
        "is sitting on a couch [VIDEO_0] </VIDEO> [END]");

  InstructionTemplate text;
  text.pattern = "Describe this image. Hint: {}";
  text.requires_input_modality = Modality::Image;
  const auto ta = construct_answer(text, "a red kite");
  CHECK(ta.groups.empty());
  CHECK(ta.tail_text == "a red kite.");

  const auto multi = construct_multi_answer({{Modality::Audio, "rain"}, {Modality::Image, "a roof"}});
  REQUIRE(multi.groups.size() == 2);
  CHECK(multi.groups[0] == spider::templ::ModalityGroup{"rain.", Modality::Audio, "rain", 0});
  CHECK(multi.groups[1] == spider::templ::ModalityGroup{"a roof.", Modality::Image, "a roof", 0});
}

TEST_CASE("planner inverts registered patterns and raises on a miss") {
  Planner p({image_video_template()}, {});
  const auto q = spider::templ::parse_question(
      "[INPUT] [SMARTMULTIMODAL] Please generate an image and a video based on the following text: " + kCat);
  REQUIRE(q.ok());
  CHECK(p.plan_answer(q.value()) == construct_answer(image_video_template(), kCat));

  const auto other_task = spider::templ::parse_question(
      "[INPUT] [IMAGE] Please generate an image and a video based on the following text: " + kCat);
  CHECK_THROWS_AS((void)p.plan_answer(other_task.value()), UnmatchedInstruction);
  const auto with_input = spider::templ::parse_question(
      "[INPUT] [SMARTMULTIMODAL] <IMAGE>{asset:x}</IMAGE> Please generate an image and a video based on the "
      "following text: " + kCat);
  CHECK_THROWS_AS((void)p.plan_answer(with_input.value()), UnmatchedInstruction);
  const auto unknown = spider::templ::parse_question("[INPUT] [SMARTMULTIMODAL] Sing me a song");
  CHECK_THROWS_AS((void)p.plan_answer(unknown.value()), UnmatchedInstruction);
}

TEST_CASE("planner prefers the most specific pattern") {
  InstructionTemplate box;
  box.pattern = "Detect {}";
  box.task_prompt = TaskPrompt::SmartMultimodal;
  box.target_modalities = {Modality::Box, Modality::Image};
  InstructionTemplate longer = box;
  longer.pattern = "Detect {}, and generate an image for it";
  Planner p({box, longer}, {});
  const auto q = spider::templ::parse_question("[INPUT] [SMARTMULTIMODAL] Detect the cup, and generate an image for it");
  const auto a = p.plan_answer(q.value());
  REQUIRE(a.groups.size() == 2);
  CHECK(a.groups[0].t_prompt == "the cup");
}

TEST_CASE("multi-request templates round trip through the planner") {
  MultiRequestTemplate m;
  m.lead = "Please generate the following: ";
  m.segment_patterns = {{Modality::Image, "an image of {}"}, {Modality::Audio, "an audio clip of {}"}};
  CHECK_NOTHROW(m.validate());
  const std::vector<std::pair<Modality, std::string>> req{{Modality::Audio, "rain"}, {Modality::Image, "a roof"}};
  const std::string instr = m.instantiate(req);
  CHECK(instr == "Please generate the following: an audio clip of rain; an image of a roof");
  CHECK(m.match(instr) == req);
  CHECK_FALSE(m.match("Please generate the following: an image of a roof").has_value());
  CHECK_THROWS_AS((void)m.instantiate({{Modality::Video, "x"}}), std::invalid_argument);

  Planner p({}, {m});
  const auto q = spider::templ::parse_question("[INPUT] [SMARTMULTIMODAL] " + instr);
  CHECK(p.plan_answer(q.value()) == construct_multi_answer(req));
}

TEST_CASE("skeleton templates reproduce the requested answer format") {
  InstructionTemplate t;
  t.pattern = "Follow this output format: {}";
  t.task_prompt = TaskPrompt::SpecificMultimodal;
  t.content_is_skeleton = true;
  CHECK_NOTHROW(t.validate());
  const std::string skeleton = spider::templ::serialize_group_skeleton(
      {{"", Modality::Video, "waves", 0}, {"", Modality::Audio, "gulls", 0}});
  const auto q = spider::templ::parse_question("[INPUT] [SPECIFICMULTIMODAL] " + t.instantiate(skeleton));
  REQUIRE(q.ok());
  const auto a = Planner({t}, {}).plan_answer(q.value());
  CHECK(a == construct_multi_answer({{Modality::Video, "waves"}, {Modality::Audio, "gulls"}}));
  CHECK(spider::templ::validate_answer_against_task(TaskPrompt::SpecificMultimodal, a).empty());
}

TEST_CASE("pipeline with alpha 0 realizes the caption assets with score 1") {
  ControllerConfig cfg = default_config();
  cfg.alpha = 0.0;
  const MockEncoders enc(5, cfg.D, cfg.D_c);
  const AssetGallery gallery(small_entries(), enc);
  const Planner planner({image_video_template()}, {});
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const Controller controller(cfg, seed);
    const PipelineContext ctx{controller, gallery, enc, planner};
    const auto r = run_pipeline(
        "[INPUT] [SMARTMULTIMODAL] Please generate an image and a video based on the following text: " + kCat, ctx);
    REQUIRE(r.realized.size() == 2);
    CHECK(r.realized[0].asset_ref == "img_cat");
    CHECK(r.realized[1].asset_ref == "vid_cat");
    for (const auto& g : r.realized) CHECK(g.score >= 1.0 - 1e-12);
    CHECK(r.control_embeddings[0].same_values(enc.encode_text(kCat)));
  }
}

TEST_CASE("pipeline surfaces parse and planner errors") {
  const ControllerConfig cfg = default_config();
  const MockEncoders enc(5, cfg.D, cfg.D_c);
  const AssetGallery gallery(small_entries(), enc);
  const Planner planner({image_video_template()}, {});
  const Controller controller(cfg, 1);
  const PipelineContext ctx{controller, gallery, enc, planner};
  CHECK_THROWS_AS((void)run_pipeline("no signal here", ctx), QuestionParseError);
  CHECK_THROWS_AS((void)run_pipeline("[INPUT] [IMAGE] draw me a cat", ctx), UnmatchedInstruction);
}

TEST_CASE("training items from the gallery and from instances") {
  const ControllerConfig cfg = default_config();
  const MockEncoders enc(5, cfg.D, cfg.D_c);
  const AssetGallery gallery(small_entries(), enc);
  const auto items = self_reconstruction_items(gallery, enc, cfg);
  REQUIRE(items.size() == gallery.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& rec = gallery.records()[i];
    CHECK(items[i].modality == rec.modality);
    CHECK(items[i].e.same_values(rec.encoder_embedding));
    CHECK(items[i].t_e.same_values(rec.target_embedding));
    CHECK(items[i].m_e.rows() == cfg.l_of(rec.modality));
  }

  const std::string question =
      "[INPUT] [SMARTMULTIMODAL] Please generate an image and a video based on the following text: " + kCat;
  const std::string answer = spider::templ::serialize_answer(construct_answer(image_video_template(), kCat));
  const std::string unmatched_answer =
      spider::templ::serialize_answer(construct_answer(image_video_template(), "A horse on a beach"));
  const auto from_pairs = items_from_instances({{question, answer}, {question, unmatched_answer}}, gallery, enc, cfg);
  REQUIRE(from_pairs.size() == 2);
  CHECK(from_pairs[0].e.same_values(gallery.at("img_cat").encoder_embedding));
  CHECK(from_pairs[1].e.same_values(gallery.at("vid_cat").encoder_embedding));
  CHECK_THROWS_AS((void)items_from_instances({{"bad", answer}}, gallery, enc, cfg), QuestionParseError);
}
