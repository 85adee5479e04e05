#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "doctest.h"
#include "spider/cli/cli.hpp"
#include "spider/templ/template.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using spider::cli::run_cli;

namespace {

const std::string kWorkedQuestion =
    "[INPUT] [SMARTMULTIMODAL] Please generate an image and a video based on the following text: A cat is "
    "sitting on a couch";
const std::string kWorkedAnswer =
    "[OUT] A cat is sitting on a couch. <IMAGE> A cat is sitting on a couch [IMAGE_0] </IMAGE>. <VIDEO> A cat "
    "is sitting on a couch [VIDEO_0] </VIDEO> [END]";

struct Run {
  int code;
  std::string out, err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> lines_of(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

// Shared workspace: synthetic corpus, a trained checkpoint and a small gallery
// holding the worked-example caption.
struct Workspace {
  fs::path dir = fs::temp_directory_path() / "spider_test_cli";
  std::string caps, gallery, ckpt, metrics, cat_gallery;
  Run train_run;

  Workspace() {
    fs::remove_all(dir);
    fs::create_directories(dir);
    caps = (dir / "caps.jsonl").string();
    gallery = (dir / "gallery.jsonl").string();
    ckpt = (dir / "c.ckpt").string();
    metrics = (dir / "m.csv").string();
    cat_gallery = (dir / "cat.jsonl").string();
    REQUIRE(run({"synth", "--captions", caps, "--gallery", gallery, "--seed", "3"}).code == 0);
    train_run = run({"train", "--gallery", gallery, "--ckpt", ckpt, "--metrics", metrics, "--steps", "500", "--seed", "3"});
    std::ofstream g(cat_gallery);
    g << R"({"asset_ref": "img_cat", "modality": "IMAGE", "caption": "A cat is sitting on a couch"})" << "\n"
      << R"({"asset_ref": "img_dog", "modality": "IMAGE", "caption": "A dog is running in a park"})" << "\n"
      << R"({"asset_ref": "vid_cat", "modality": "VIDEO", "caption": "A cat is sitting on a couch"})" << "\n"
      << R"({"asset_ref": "vid_sea", "modality": "VIDEO", "caption": "Waves on a rocky shore"})" << "\n";
  }
};

Workspace& workspace() {
  static Workspace w;
  return w;
}

}  // namespace

TEST_CASE("parse command") {
  const Run ok = run({"parse", "--answer", kWorkedAnswer, "--json"});
  CHECK(ok.code == 0);
  const json j = json::parse(ok.out);
  CHECK(j["answer"]["groups"].size() == 2);

  const Run q = run({"parse", "--question", kWorkedQuestion});
  CHECK(q.code == 0);
  CHECK(json::parse(q.out)["question"]["task_prompt"] == "SMARTMULTIMODAL");

  const Run bad = run({"parse", "--answer", "[OUT] no end"});
  CHECK(bad.code == 2);
  CHECK(json::parse(bad.out)["error"]["kind"] == "MissingEndSignal");

  CHECK(run({"parse", "--answer", "x", "--question", "y"}).code == 64);
  CHECK(run({"parse"}).code == 64);
  CHECK(run({}).code == 64);
  CHECK(run({"frobnicate"}).code == 64);
  CHECK(run({"--help"}).code == 0);
}

TEST_CASE("forge command") {
  auto& w = workspace();
  const std::string a = (w.dir / "a.jsonl").string(), b = (w.dir / "b.jsonl").string();
  REQUIRE(run({"forge", "--flavor", "t2txs-t2i", "--count", "100", "--captions", w.caps, "--out", a, "--seed", "9"}).code ==
          0);
  REQUIRE(run({"forge", "--flavor", "t2txs-t2i", "--count", "100", "--captions", w.caps, "--out", b, "--seed", "9"}).code ==
          0);
  const auto lines = lines_of(a);
  REQUIRE(lines.size() == 100);
  for (const auto& l : lines) {
    const json j = json::parse(l);
    CHECK(spider::templ::parse_question(j["question"].get<std::string>()).ok());
    CHECK(spider::templ::parse_answer(j["answer"].get<std::string>()).ok());
    CHECK(j["flavor"] == "t2txs-t2i");
  }
  CHECK(slurp(a) == slurp(b));
  CHECK(fs::exists(a + ".manifest.json"));
  const json manifest = json::parse(slurp(a + ".manifest.json"));
  CHECK(manifest["command"] == "forge");
  CHECK(manifest["seed"] == 9);
  CHECK(manifest.contains("git_describe"));
  CHECK(manifest.contains("wall_clock_seconds"));

  const std::string tgi = (w.dir / "tgi.jsonl").string();
  REQUIRE(run({"forge", "--flavor", "tgi", "--count", "1000", "--out", tgi}).code == 0);
  CHECK(lines_of(tgi).size() == 1000);

  CHECK(run({"forge", "--flavor", "t2txs-t2x", "--out", a}).code == 64);
  CHECK(run({"forge", "--flavor", "t2txs-t2i", "--out", a}).code == 64);
  CHECK(run({"forge", "--flavor", "t2txs-t2i", "--captions", (w.dir / "missing").string(), "--out", a}).code == 70);
}

TEST_CASE("forge accepts an edited instruction pool") {
  auto& w = workspace();
  const std::string pool = (w.dir / "pool.json").string(), out = (w.dir / "pool_out.jsonl").string();
  REQUIRE(run({"forge", "--flavor", "x2txs-i2b", "--count", "1", "--captions", w.caps, "--out", out, "--write-pool",
               pool}).code == 0);
  json j = json::parse(slurp(pool));
  CHECK(j.size() == 18);
  j = json::array({j[0]});
  std::ofstream(pool) << j.dump();
  REQUIRE(run({"forge", "--flavor", "x2txs-i2b", "--count", "20", "--captions", w.caps, "--out", out, "--pool", pool})
              .code == 0);
  for (const auto& l : lines_of(out)) CHECK(json::parse(l)["question"].get<std::string>().find("Detect ") != std::string::npos);

  std::ofstream(pool) << R"([{"pattern": "no placeholder", "task_prompt": "BOX", "target_modalities": ["BOX"]}])";
  const Run bad = run({"forge", "--flavor", "x2txs-i2b", "--captions", w.caps, "--out", out, "--pool", pool});
  CHECK(bad.code == 70);
  CHECK(bad.err.find("entry 0") != std::string::npos);
}

TEST_CASE("mix command") {
  auto& w = workspace();
  const Run r = run({"mix", "--stage", "3", "--count", "100000", "--seed", "5"});
  REQUIRE(r.code == 0);
  const json j = json::parse(r.out);
  for (const auto& [name, v] : j["datasets"].items()) {
    CAPTURE(name);
    CHECK(std::abs(v["frequency"].get<double>() - v["proportion"].get<double>()) <= 0.01);
  }
  CHECK(j["datasets"].size() == 11);

  const std::string seq = (w.dir / "seq.txt").string();
  REQUIRE(run({"mix", "--stage", "1", "--count", "2000", "--out", seq}).code == 0);
  const auto names = lines_of(seq);
  CHECK(names.size() == 2000);
  for (const auto& n : names) {
    CHECK(n.find("t2txs") == std::string::npos);
    CHECK(n.find("x2txs") == std::string::npos);
    CHECK(n != "smmi");
    CHECK(n != "spmi");
    CHECK(n != "tgi");
  }
  CHECK(run({"mix", "--stage", "4"}).code == 64);
  CHECK(run({"mix", "--stage", "0"}).code == 64);
}

TEST_CASE("mix merges dataset files") {
  auto& w = workspace();
  std::vector<std::string> args{"mix", "--stage", "2", "--count", "300", "--out", (w.dir / "merged.jsonl").string()};
  for (const char* f : {"t2txs-t2i", "t2txs-t2v", "t2txs-t2a", "x2txs-i2t", "x2txs-v2t", "x2txs-a2t", "x2txs-i2b",
                        "x2txs-i2m"}) {
    const std::string p = (w.dir / (std::string(f) + ".jsonl")).string();
    REQUIRE(run({"forge", "--flavor", f, "--count", "20", "--captions", w.caps, "--out", p}).code == 0);
    args.push_back("--dataset");
    args.push_back(std::string(f) + "=" + p);
  }
  REQUIRE(run(args).code == 0);
  const auto merged = lines_of(w.dir / "merged.jsonl");
  CHECK(merged.size() == 300);
  std::map<std::string, int> seen;
  for (const auto& l : merged) ++seen[json::parse(l)["flavor"].get<std::string>()];
  CHECK(seen.size() == 8);

  args.pop_back();
  args.pop_back();
  CHECK(run(args).code == 64);
}

TEST_CASE("train command") {
  auto& w = workspace();
  REQUIRE(w.train_run.code == 0);
  const json j = json::parse(w.train_run.out);
  CHECK(j["items"] == 200);
  CHECK(j["final"]["loss_total"].get<double>() < j["initial"]["loss_total"].get<double>());
  const auto rows = lines_of(w.metrics);
  REQUIRE(rows.size() == 501);
  CHECK(rows[0] == "step,loss_total,loss_align,loss_recon,mean_cos_align,mean_cos_recon");
  for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].substr(0, rows[i].find(',')) == std::to_string(i));
  CHECK(fs::exists(w.ckpt + ".json"));
  const json manifest = json::parse(slurp(w.ckpt + ".manifest.json"));
  CHECK(manifest["command"] == "train");

  const std::string cfg = (w.dir / "bad_config.json").string();
  std::ofstream(cfg) << R"({"D": 0})";
  CHECK(run({"train", "--gallery", w.gallery, "--config", cfg, "--ckpt", w.ckpt + "x", "--metrics", w.metrics + "x"})
            .code == 70);
}

TEST_CASE("train on forged instances") {
  auto& w = workspace();
  const std::string data = (w.dir / "train_data.jsonl").string();
  REQUIRE(run({"forge", "--flavor", "t2txs-t2v", "--count", "50", "--captions", w.caps, "--out", data}).code == 0);
  const Run r = run({"train", "--gallery", w.gallery, "--data", data, "--steps", "5", "--ckpt",
                     (w.dir / "d.ckpt").string(), "--metrics", (w.dir / "d.csv").string()});
  REQUIRE(r.code == 0);
  CHECK(json::parse(r.out)["items"].get<int>() > 0);
}

TEST_CASE("gradcheck command") {
  const Run ok = run({"gradcheck", "--seed", "2"});
  CHECK(ok.code == 0);
  const json j = json::parse(ok.out);
  CHECK(j["max_relative_error"].get<double>() <= 1e-4);
  CHECK_FALSE(j["worst_parameter"].get<std::string>().empty());

  const Run bad = run({"gradcheck", "--seed", "2", "--corrupt"});
  CHECK(bad.code == 1);
  CHECK_FALSE(json::parse(bad.out)["worst_parameter"].get<std::string>().empty());
  CHECK(run({"gradcheck", "--corrupt", "--corrupt-op", "layer_norm"}).code == 1);
  CHECK(run({"gradcheck", "--corrupt", "--corrupt-op", "nope"}).code == 64);
}

TEST_CASE("demo command") {
  auto& w = workspace();
  const Run r = run({"demo", "--question", kWorkedQuestion, "--ckpt", w.ckpt, "--gallery", w.cat_gallery, "--alpha", "0"});
  REQUIRE(r.code == 0);
  const json j = json::parse(r.out);
  REQUIRE(j["realized"].size() == 2);
  CHECK(j["realized"][0]["asset_ref"] == "img_cat");
  CHECK(j["realized"][1]["asset_ref"] == "vid_cat");
  for (const auto& g : j["realized"]) CHECK(g["score"].get<double>() >= 1.0 - 1e-12);
  CHECK(j["answer"] == kWorkedAnswer);
  CHECK(run({"parse", "--answer", j["answer"].get<std::string>()}).code == 0);

  CHECK(run({"demo", "--question", "not a question", "--ckpt", w.ckpt, "--gallery", w.cat_gallery}).code == 2);
  CHECK(run({"demo", "--question", "[INPUT] [IMAGE] hum a tune", "--ckpt", w.ckpt, "--gallery", w.cat_gallery}).code == 3);
}

TEST_CASE("pseudo command") {
  auto& w = workspace();
  const std::string a = (w.dir / "pa.jsonl").string(), b = (w.dir / "pb.jsonl").string();
  REQUIRE(run({"pseudo", "--flavor", "x2txs-i2b", "--ckpt", w.ckpt, "--gallery", w.gallery, "--captions", w.caps, "--out",
               a, "--seed", "4"}).code == 0);
  const auto lines = lines_of(a);
  CHECK(lines.size() == 2000);
  for (const auto& l : lines) {
    const json j = json::parse(l);
    const auto q = spider::templ::parse_question(j["question"].get<std::string>());
    const auto ans = spider::templ::parse_answer(j["answer"].get<std::string>());
    REQUIRE(q.ok());
    REQUIRE(ans.ok());
    CHECK(spider::templ::validate_answer_against_task(q.value().task_prompt, ans.value()).empty());
    CHECK(j["realized_assets"].size() == ans.value().groups.size());
  }
  REQUIRE(run({"pseudo", "--flavor", "x2txs-i2b", "--ckpt", w.ckpt, "--gallery", w.gallery, "--captions", w.caps, "--out",
               b, "--seed", "4"}).code == 0);
  CHECK(slurp(a) == slurp(b));
  CHECK(run({"pseudo", "--flavor", "tgi", "--count", "10", "--ckpt", w.ckpt, "--gallery", w.gallery, "--out", b}).code == 0);
  CHECK(lines_of(b).size() == 10);
}

TEST_CASE("SPIDER_SEED is the default seed") {
  auto& w = workspace();
  const std::string a = (w.dir / "env_a.jsonl").string(), b = (w.dir / "env_b.jsonl").string();
  ::setenv("SPIDER_SEED", "77", 1);
  REQUIRE(run({"forge", "--flavor", "smmi", "--count", "30", "--captions", w.caps, "--out", a}).code == 0);
  ::unsetenv("SPIDER_SEED");
  REQUIRE(run({"forge", "--flavor", "smmi", "--count", "30", "--captions", w.caps, "--out", b, "--seed", "77"}).code == 0);
  CHECK(slurp(a) == slurp(b));
  CHECK(json::parse(slurp(a + ".manifest.json"))["seed"] == 77);
}
