#include "spider/cli/cli.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "spider/controller/checkpoint.hpp"
#include "spider/controller/controller.hpp"
#include "spider/forge/dataset.hpp"
#include "spider/forge/mix.hpp"
#include "spider/forge/synth.hpp"
#include "spider/pipeline/pipeline.hpp"
#include "spider/templ/json.hpp"
#include "spider/templ/template.hpp"

#ifndef SPIDER_GIT_DESCRIBE
#define SPIDER_GIT_DESCRIBE "unknown"
#endif

namespace spider::cli {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

struct CommandError : std::runtime_error {
  CommandError(int code, const std::string& what) : std::runtime_error(what), code(code) {}
  int code;
};

[[noreturn]] void usage(const std::string& msg) { throw CommandError(kExitUsage, msg); }

struct Manifest {
  std::string command;
  std::vector<std::string> args;
  std::uint64_t seed = 0;
  std::string config;
  std::map<std::string, std::string> inputs;
  std::map<std::string, std::string> outputs;
  Clock::time_point start = Clock::now();

  void write(const std::string& artifact) const {
    ordered_json j;
    j["command"] = command;
    j["args"] = args;
    j["seed"] = seed;
    j["config"] = config;
    j["inputs"] = inputs;
    j["outputs"] = outputs;
    j["wall_clock_seconds"] = std::chrono::duration<double>(Clock::now() - start).count();
    j["git_describe"] = SPIDER_GIT_DESCRIBE;
    std::ofstream out(artifact + ".manifest.json", std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write manifest for '" + artifact + "'");
    out << j.dump(2) << "\n";
  }
};

controller::ControllerConfig read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config '" + path + "'");
  try {
    return controller::config_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw std::runtime_error("config '" + path + "': " + e.what());
  }
}

forge::Flavor flavor_or_usage(const std::string& name) {
  const auto f = forge::parse_flavor(name);
  if (!f) {
    std::string known;
    for (forge::Flavor x : forge::kAllFlavors) known += (known.empty() ? "" : ", ") + std::string(forge::flavor_name(x));
    usage("unknown flavor '" + name + "' (known: " + known + ")");
  }
  return *f;
}

std::vector<forge::CaptionRecord> captions_for(forge::Flavor f, const std::string& path) {
  if (path.empty()) {
    if (f != forge::Flavor::TGI) usage("--captions is required for flavor " + std::string(forge::flavor_name(f)));
    return {};
  }
  return forge::load_captions(path);
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

ordered_json breakdown_json(const controller::LossBreakdown& b) {
  ordered_json j;
  j["loss_total"] = b.total;
  j["loss_align"] = b.align;
  j["loss_recon"] = b.recon;
  j["mean_cos_align"] = b.mean_cos_align;
  j["mean_cos_recon"] = b.mean_cos_recon;
  return j;
}

std::optional<numerics::OpKind> parse_op(const std::string& name) {
  using numerics::OpKind;
  for (OpKind k : {OpKind::MatMul, OpKind::Add, OpKind::AddRow, OpKind::Sub, OpKind::Hadamard, OpKind::Affine,
                   OpKind::Tanh, OpKind::SoftmaxRows, OpKind::Transpose, OpKind::ConcatRows, OpKind::SliceRows,
                   OpKind::MeanRows, OpKind::LayerNorm, OpKind::Cosine, OpKind::Sum, OpKind::ScaleByEntry}) {
    if (numerics::op_name(k) == name) return k;
  }
  return std::nullopt;
}

struct ParseArgs {
  std::string question, answer;
  bool compact = false;
};

int cmd_parse(const ParseArgs& a, std::ostream& out, std::ostream& err) {
  if (a.question.empty() == a.answer.empty()) usage("give exactly one of --question or --answer");
  const int indent = a.compact ? -1 : 2;
  auto fail = [&](const templ::ParseError& e) {
    out << json{{"ok", false}, {"error", templ::to_json(e)}}.dump(indent) << "\n";
    err << e.describe() << "\n";
    return kExitParseError;
  };
  if (!a.question.empty()) {
    const auto q = templ::parse_question(a.question);
    if (!q.ok()) return fail(q.error());
    out << json{{"ok", true}, {"question", templ::to_json(q.value())}}.dump(indent) << "\n";
    return kExitOk;
  }
  const auto ans = templ::parse_answer(a.answer);
  if (!ans.ok()) return fail(ans.error());
  out << json{{"ok", true}, {"answer", templ::to_json(ans.value())}}.dump(indent) << "\n";
  return kExitOk;
}

struct SynthArgs {
  std::size_t per_modality = 40;
  std::uint64_t seed = 0;
  std::string captions, gallery;
};

int cmd_synth(const SynthArgs& a, Manifest m, std::ostream& out) {
  const auto corpus = forge::synthesize_corpus(a.seed, a.per_modality);
  forge::write_captions(a.captions, corpus.captions);
  pipeline::write_gallery_jsonl(a.gallery, corpus.gallery);
  m.outputs = {{"captions", a.captions}, {"gallery", a.gallery}};
  m.write(a.captions);
  out << ordered_json{{"captions", corpus.captions.size()}, {"gallery", corpus.gallery.size()}}.dump() << "\n";
  return kExitOk;
}

struct ForgeArgs {
  std::string flavor;
  std::size_t count = 1000;
  std::uint64_t seed = 0;
  std::string captions, pool, out, write_pool;
};

int cmd_forge(const ForgeArgs& a, Manifest m, std::ostream& out) {
  const forge::Flavor f = flavor_or_usage(a.flavor);
  const auto sources = captions_for(f, a.captions);
  std::optional<std::vector<forge::InstructionTemplate>> pool;
  if (!a.pool.empty()) {
    std::ifstream in(a.pool);
    if (!in) throw std::runtime_error("cannot open pool '" + a.pool + "'");
    try {
      pool = forge::pool_from_json(json::parse(in));
    } catch (const json::exception& e) {
      throw std::runtime_error("pool '" + a.pool + "': " + e.what());
    }
  }
  if (!a.write_pool.empty()) {
    std::ofstream po(a.write_pool, std::ios::trunc);
    po << forge::pool_to_json(pool ? *pool : forge::instruction_pool(f)).dump(2) << "\n";
  }
  const auto data = forge::build_dataset(f, a.count, a.seed, sources, pool ? &*pool : nullptr);
  forge::write_dataset_jsonl(a.out, data);
  m.inputs = {{"captions", a.captions}, {"pool", a.pool}};
  m.outputs = {{"dataset", a.out}};
  m.write(a.out);
  out << ordered_json{{"flavor", a.flavor}, {"count", data.size()}, {"out", a.out}}.dump() << "\n";
  return kExitOk;
}

struct MixArgs {
  int stage = 0;
  std::size_t count = 100000;
  std::uint64_t seed = 0;
  std::string out;
  std::vector<std::string> datasets;
};

int cmd_mix(const MixArgs& a, Manifest m, std::ostream& out) {
  if (a.stage < 1 || a.stage > 3) usage("--stage must be 1, 2 or 3");
  const forge::StageMix& mix = forge::stage_mix(a.stage);
  mix.validate();

  std::map<std::string, std::vector<std::string>> lines;
  for (const auto& spec : a.datasets) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0) usage("--dataset expects NAME=PATH, got '" + spec + "'");
    const std::string name = spec.substr(0, eq), path = spec.substr(eq + 1);
    if (mix.proportion(name) == 0.0) usage("dataset '" + name + "' is not part of stage " + std::to_string(a.stage));
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset '" + path + "'");
    auto& dst = lines[name];
    for (std::string line; std::getline(in, line);) {
      if (!line.empty()) dst.push_back(line);
    }
    if (dst.empty()) throw std::runtime_error("dataset '" + path + "' is empty");
    m.inputs[name] = path;
  }
  if (!lines.empty()) {
    for (const auto& [name, p] : mix.entries) {
      if (!lines.count(name)) usage("stage " + std::to_string(a.stage) + " needs --dataset " + name + "=PATH");
    }
  }

  numerics::Rng rng = numerics::Rng(a.seed).substream("mix." + std::to_string(a.stage));
  numerics::Rng pick = numerics::Rng(a.seed).substream("mix.pick");
  std::map<std::string, std::size_t> counts;
  std::ofstream file;
  if (!a.out.empty()) {
    file.open(a.out, std::ios::binary | std::ios::trunc);
    if (!file) throw std::runtime_error("cannot write '" + a.out + "'");
  }
  for (std::size_t i = 0; i < a.count; ++i) {
    const std::string& name = forge::stage_sampler_next(mix, rng);
    ++counts[name];
    if (!file.is_open()) continue;
    if (lines.empty()) {
      file << name << "\n";
    } else {
      const auto& src = lines.at(name);
      file << src[pick.uniform_index(src.size())] << "\n";
    }
  }
  ordered_json report;
  report["stage"] = a.stage;
  report["count"] = a.count;
  for (const auto& [name, p] : mix.entries) {
    report["datasets"][name] = {{"proportion", p},
                                {"frequency", a.count ? static_cast<double>(counts[name]) / a.count : 0.0}};
  }
  if (!a.out.empty()) {
    m.outputs = {{"sequence", a.out}};
    m.write(a.out);
  }
  out << report.dump(2) << "\n";
  return kExitOk;
}

struct TrainArgs {
  std::string data, gallery, config, ckpt, metrics;
  std::size_t steps = 500;
  std::size_t batch_size = 4;
  double lr = 1e-4;
  double weight_decay = 1e-3;
  std::uint64_t seed = 0;
  std::uint64_t encoder_seed = 0;
};

int cmd_train(const TrainArgs& a, Manifest m, std::ostream& out) {
  const controller::ControllerConfig cfg = a.config.empty() ? controller::ControllerConfig{} : read_config(a.config);
  const pipeline::MockEncoders enc(a.encoder_seed, cfg.D, cfg.D_c);
  const auto gallery = pipeline::AssetGallery::load_jsonl(a.gallery, enc);
  const auto items = a.data.empty() ? pipeline::self_reconstruction_items(gallery, enc, cfg)
                                    : pipeline::items_from_instances(forge::read_pairs_jsonl(a.data), gallery, enc, cfg);
  if (items.empty()) throw std::runtime_error("no training items: no answer group names a gallery caption");

  controller::Controller c(cfg, a.seed);
  const auto initial = controller::evaluate(c, items);

  std::ofstream csv(a.metrics, std::ios::trunc);
  if (!csv) throw std::runtime_error("cannot write metrics '" + a.metrics + "'");
  csv << "step,loss_total,loss_align,loss_recon,mean_cos_align,mean_cos_recon\n";
  controller::TrainOptions opts;
  opts.steps = a.steps;
  opts.batch_size = a.batch_size;
  opts.seed = a.seed;
  opts.adam.learning_rate = a.lr;
  opts.adam.weight_decay = a.weight_decay;
  controller::train(c, items, opts, [&](std::size_t step, const controller::LossBreakdown& b) {
    csv << step << ',' << fmt(b.total) << ',' << fmt(b.align) << ',' << fmt(b.recon) << ',' << fmt(b.mean_cos_align)
        << ',' << fmt(b.mean_cos_recon) << '\n';
  });
  csv.close();
  const auto final = controller::evaluate(c, items);
  controller::save_checkpoint(a.ckpt, c);

  m.config = a.config;
  m.inputs = {{"data", a.data}, {"gallery", a.gallery}};
  m.outputs = {{"checkpoint", a.ckpt}, {"metrics", a.metrics}};
  m.write(a.ckpt);
  ordered_json report;
  report["items"] = items.size();
  report["steps"] = a.steps;
  report["initial"] = breakdown_json(initial);
  report["final"] = breakdown_json(final);
  out << report.dump(2) << "\n";
  return kExitOk;
}

struct GradcheckArgs {
  std::string config;
  std::uint64_t seed = 0;
  bool corrupt = false;
  std::string corrupt_op = "softmax_rows";
};

int cmd_gradcheck(const GradcheckArgs& a, std::ostream& out) {
  const controller::ControllerConfig cfg = a.config.empty() ? controller::gradcheck_config() : read_config(a.config);
  numerics::GradCheckOptions opts;
  if (a.corrupt) {
    const auto op = parse_op(a.corrupt_op);
    if (!op) usage("unknown op '" + a.corrupt_op + "'");
    opts.fault = *op;
  }
  const auto r = controller::check_controller_gradients(cfg, a.seed, opts);
  constexpr double kThreshold = 1e-4;
  const bool passed = r.max_relative_error <= kThreshold;
  ordered_json j;
  j["max_relative_error"] = r.max_relative_error;
  j["threshold"] = kThreshold;
  j["worst_parameter"] = r.worst_parameter;
  j["worst_index"] = r.worst_index;
  j["worst_analytic"] = r.worst_analytic;
  j["worst_numeric"] = r.worst_numeric;
  j["entries_checked"] = r.entries_checked;
  j["corrupted_op"] = a.corrupt ? json(a.corrupt_op) : json(nullptr);
  j["passed"] = passed;
  out << j.dump(2) << "\n";
  return passed ? kExitOk : kExitGradcheckFailed;
}

struct DemoArgs {
  std::string question, ckpt, gallery;
  std::optional<double> alpha;
  std::uint64_t encoder_seed = 0;
};

int cmd_demo(const DemoArgs& a, std::ostream& out) {
  controller::ControllerConfig cfg = controller::load_checkpoint(a.ckpt).config();
  if (a.alpha) cfg.alpha = *a.alpha;
  const controller::Controller c = controller::load_checkpoint(a.ckpt, cfg);
  const pipeline::MockEncoders enc(a.encoder_seed, cfg.D, cfg.D_c);
  const auto gallery = pipeline::AssetGallery::load_jsonl(a.gallery, enc);
  const auto planner = forge::default_planner();
  const auto r = pipeline::run_pipeline(a.question, {c, gallery, enc, planner});
  ordered_json j;
  j["question"] = templ::serialize_question(r.question);
  j["answer"] = templ::serialize_answer(r.answer);
  j["groups"] = templ::to_json(r.answer)["groups"];
  j["realized"] = ordered_json::array();
  for (const auto& g : r.realized) {
    j["realized"].push_back(
        ordered_json{{"modality", templ::modality_name(g.modality)}, {"asset_ref", g.asset_ref}, {"score", g.score}});
  }
  out << j.dump(2) << "\n";
  return kExitOk;
}

struct PseudoArgs {
  std::string flavor, ckpt, gallery, captions, out;
  std::optional<std::size_t> count;
  std::uint64_t seed = 0;
  std::uint64_t encoder_seed = 0;
};

int cmd_pseudo(const PseudoArgs& a, Manifest m, std::ostream& out) {
  const forge::Flavor f = flavor_or_usage(a.flavor);
  const auto sources = captions_for(f, a.captions);
  const controller::Controller c = controller::load_checkpoint(a.ckpt);
  const auto& cfg = c.config();
  const pipeline::MockEncoders enc(a.encoder_seed, cfg.D, cfg.D_c);
  const auto gallery = pipeline::AssetGallery::load_jsonl(a.gallery, enc);
  const auto planner = forge::default_planner();
  const std::size_t count = a.count.value_or(forge::flavor_info(f).pseudo_count);
  const auto recs = forge::emit_pseudo_dataset(f, count, a.seed, sources, {c, gallery, enc, planner});
  forge::write_pseudo_jsonl(a.out, recs);
  m.inputs = {{"checkpoint", a.ckpt}, {"gallery", a.gallery}, {"captions", a.captions}};
  m.outputs = {{"pseudo", a.out}};
  m.write(a.out);
  out << ordered_json{{"flavor", a.flavor}, {"count", recs.size()}, {"out", a.out}}.dump() << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Any-to-many modality generation toolkit", "spider"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  auto add_seed = [&seed](CLI::App* sub) {
    sub->add_option("--seed", seed, "Random seed")->envname("SPIDER_SEED");
  };

  ParseArgs pa;
  auto* parse = app.add_subcommand("parse", "Parse a question or answer string");
  auto* pq = parse->add_option("--question", pa.question, "Question string");
  parse->add_option("--answer", pa.answer, "Answer string")->excludes(pq);
  parse->add_flag("--json", pa.compact, "Single-line JSON output");

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "Write synthetic captions and a gallery");
  synth->add_option("--per-modality", sa.per_modality, "Records per modality")->check(CLI::PositiveNumber);
  synth->add_option("--captions", sa.captions, "Captions JSONL output")->required();
  synth->add_option("--gallery", sa.gallery, "Gallery JSONL output")->required();
  add_seed(synth);

  ForgeArgs fa;
  auto* forge_cmd = app.add_subcommand("forge", "Build a TMM dataset");
  forge_cmd->add_option("--flavor", fa.flavor, "Dataset flavor")->required();
  forge_cmd->add_option("--count", fa.count, "Number of instances");
  forge_cmd->add_option("--captions", fa.captions, "Captions JSONL");
  forge_cmd->add_option("--pool", fa.pool, "Instruction pool JSON replacing the built-in pool");
  forge_cmd->add_option("--write-pool", fa.write_pool, "Write the effective instruction pool as JSON");
  forge_cmd->add_option("--out", fa.out, "Output JSONL")->required();
  add_seed(forge_cmd);

  MixArgs ma;
  auto* mix = app.add_subcommand("mix", "Sample a stage's dataset mixture");
  mix->add_option("--stage", ma.stage, "Training stage (1, 2 or 3)")->required();
  mix->add_option("--count", ma.count, "Number of draws");
  mix->add_option("--out", ma.out, "Sequence output (names, or instances with --dataset)");
  mix->add_option("--dataset", ma.datasets, "NAME=PATH instance file for a mixture entry");
  add_seed(mix);

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train the decoders-controller");
  train->add_option("--data", ta.data, "TMM or pseudo JSONL; default: gallery self-reconstruction");
  train->add_option("--gallery", ta.gallery, "Gallery JSONL")->required();
  train->add_option("--config", ta.config, "Controller config JSON");
  train->add_option("--steps", ta.steps, "Optimizer steps");
  train->add_option("--batch-size", ta.batch_size, "Batch size")->check(CLI::PositiveNumber);
  train->add_option("--lr", ta.lr, "Learning rate");
  train->add_option("--weight-decay", ta.weight_decay, "Decoupled weight decay");
  train->add_option("--encoder-seed", ta.encoder_seed, "Mock encoder seed");
  train->add_option("--ckpt", ta.ckpt, "Checkpoint output")->required();
  train->add_option("--metrics", ta.metrics, "Metrics CSV output")->required();
  add_seed(train);

  GradcheckArgs ga;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of the controller graph");
  gradcheck->add_option("--config", ga.config, "Controller config JSON (default D=16, D_c=8)");
  gradcheck->add_flag("--corrupt", ga.corrupt, "Scale one backward rule by 1.1");
  gradcheck->add_option("--corrupt-op", ga.corrupt_op, "Op corrupted by --corrupt");
  add_seed(gradcheck);

  DemoArgs da;
  double alpha = 0.0;
  auto* demo = app.add_subcommand("demo", "Run one question end to end");
  demo->add_option("--question", da.question, "Question string")->required();
  demo->add_option("--ckpt", da.ckpt, "Checkpoint")->required();
  demo->add_option("--gallery", da.gallery, "Gallery JSONL")->required();
  auto* alpha_opt = demo->add_option("--alpha", alpha, "Override the fusion weight");
  demo->add_option("--encoder-seed", da.encoder_seed, "Mock encoder seed");

  PseudoArgs ps;
  std::size_t pseudo_count = 0;
  auto* pseudo = app.add_subcommand("pseudo", "Generate a pseudo X-to-Xs dataset");
  pseudo->add_option("--flavor", ps.flavor, "Dataset flavor")->required();
  auto* pcount = pseudo->add_option("--count", pseudo_count, "Records (default 2000, 1000 for tgi)");
  pseudo->add_option("--ckpt", ps.ckpt, "Checkpoint")->required();
  pseudo->add_option("--gallery", ps.gallery, "Gallery JSONL")->required();
  pseudo->add_option("--captions", ps.captions, "Captions JSONL");
  pseudo->add_option("--out", ps.out, "Output JSONL")->required();
  pseudo->add_option("--encoder-seed", ps.encoder_seed, "Mock encoder seed");
  add_seed(pseudo);

  try {
    app.parse(std::vector<std::string>(args.rbegin(), args.rend()));
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return e.get_exit_code() == 0 ? kExitOk : kExitUsage;
  }

  Manifest manifest;
  manifest.args = args;
  try {
    CLI::App* sub = app.get_subcommands().front();
    manifest.command = sub->get_name();
    manifest.seed = seed;
    if (sub == parse) return cmd_parse(pa, out, err);
    if (sub == synth) {
      sa.seed = seed;
      return cmd_synth(sa, manifest, out);
    }
    if (sub == forge_cmd) {
      fa.seed = seed;
      return cmd_forge(fa, manifest, out);
    }
    if (sub == mix) {
      ma.seed = seed;
      return cmd_mix(ma, manifest, out);
    }
    if (sub == train) {
      ta.seed = seed;
      return cmd_train(ta, manifest, out);
    }
    if (sub == gradcheck) {
      ga.seed = seed;
      return cmd_gradcheck(ga, out);
    }
    if (sub == demo) {
      if (alpha_opt->count()) da.alpha = alpha;
      return cmd_demo(da, out);
    }
    if (sub == pseudo) {
      ps.seed = seed;
      if (pcount->count()) ps.count = pseudo_count;
      return cmd_pseudo(ps, manifest, out);
    }
    usage("unknown command");
  } catch (const CommandError& e) {
    err << "error: " << e.what() << "\n";
    return e.code;
  } catch (const pipeline::QuestionParseError& e) {
    out << json{{"ok", false}, {"error", templ::to_json(e.error())}}.dump(2) << "\n";
    err << "error: " << e.what() << "\n";
    return kExitParseError;
  } catch (const pipeline::UnmatchedInstruction& e) {
    err << "error: " << e.what() << "\n";
    return kExitPlannerMiss;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace spider::cli
