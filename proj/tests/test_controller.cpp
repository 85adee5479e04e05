#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "doctest.h"
#include "spider/controller/checkpoint.hpp"
#include "spider/controller/controller.hpp"
#include "spider/numerics/random.hpp"

using namespace spider::controller;
using spider::numerics::GraphBuilder;
using spider::numerics::OpKind;
using spider::numerics::Rng;
using spider::templ::Modality;

namespace {

Tensor random_unit(Rng& rng, std::size_t rows, std::size_t cols) {
  Tensor t(rows, cols);
  for (double& v : t.data()) v = rng.normal();
  const double n = spider::numerics::l2_norm(t.data());
  for (double& v : t.data()) v /= n;
  return t;
}

ControllerConfig small_config() {
  ControllerConfig c;
  c.D = 16;
  c.D_c = 8;
  c.K = 2;
  c.router_hidden = 8;
  return c;
}

std::vector<TrainingItem> random_items(const ControllerConfig& c, std::uint64_t seed, std::size_t n) {
  Rng rng(seed);
  std::vector<TrainingItem> items;
  for (std::size_t i = 0; i < n; ++i) {
    const Modality m = spider::templ::kAllModalities[rng.uniform_index(3)];
    items.push_back({m, random_unit(rng, c.l_of(m), c.D), random_unit(rng, 1, c.D_c), random_unit(rng, 1, c.D)});
  }
  return items;
}

void zero_expert_weights(Controller& c) {
  for (auto& e : c.params().experts) {
    for (auto& l : e.layers) {
      for (Tensor* t : {&l.wq, &l.wk, &l.wv, &l.wo, &l.ffn_in, &l.ffn_out}) std::fill(t->data().begin(), t->data().end(), 0.0);
    }
  }
}

std::vector<char> slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("spider_test_" + name);
}

}  // namespace

TEST_CASE("config defaults and json") {
  ControllerConfig c;
  CHECK(c.D == 64);
  CHECK(c.D_c == 32);
  CHECK(c.K == 2);
  CHECK(c.alpha == 0.2);
  CHECK(c.lambda_recon == 1.0);
  CHECK(c.n_of(Modality::Video) == 1);
  CHECK(c.l_of(Modality::Image) == 1);

  c.N[1] = 3;
  c.alpha = 0.0;
  CHECK(config_from_json(to_json(c)) == c);

  auto j = to_json(c);
  j["N"] = 2;
  CHECK(config_from_json(j).n_of(Modality::Mask) == 2);
  j["K"] = 0;
  CHECK_THROWS_AS(config_from_json(j), std::invalid_argument);
  j = to_json(ControllerConfig{});
  j["alpha"] = -0.1;
  CHECK_THROWS_AS(config_from_json(j), std::invalid_argument);
  j = to_json(ControllerConfig{});
  j["L"] = {{"PHOTO", 1}};
  CHECK_THROWS_AS(config_from_json(j), std::invalid_argument);
}

TEST_CASE("parameter inventory") {
  Controller c(small_config(), 1);
  const auto named = c.params().named();
  CHECK(named.front().name == "mquery.IMAGE");
  CHECK(named.back().name == "fuse.MASK");
  CHECK(std::any_of(named.begin(), named.end(), [](const auto& n) { return n.name == "expert.1.layer.0.attn.wq"; }));
  for (const auto& n : named) {
    CHECK(n.tensor->requires_grad());
    CHECK(n.tensor->all_finite());
  }
  CHECK(c.params().router.w2.shape() == spider::numerics::Shape{8, 2});
  CHECK(c.params().fuse[0].shape() == spider::numerics::Shape{16, 8});

  Controller same(small_config(), 1);
  Controller other(small_config(), 2);
  CHECK(same.params().experts[0].layers[0].wq.same_values(c.params().experts[0].layers[0].wq));
  CHECK_FALSE(other.params().experts[0].layers[0].wq.same_values(c.params().experts[0].layers[0].wq));
}

TEST_CASE("expert_forward shape and residual pass-through") {
  ControllerConfig cfg = small_config();
  cfg.N[0] = 3;
  cfg.L[0] = 2;
  Controller c(cfg, 3);
  Rng rng(5);
  Tape tape;
  Var q = c.mquery(tape, Modality::Image);
  Var m_e = tape.constant(random_unit(rng, 2, cfg.D));
  Var out = c.expert_forward(0, q, m_e);
  CHECK(out.shape() == spider::numerics::Shape{3, cfg.D});
  CHECK_THROWS_AS(c.expert_forward(2, q, m_e), std::out_of_range);

  zero_expert_weights(c);
  Tape tape2;
  Var q2 = c.mquery(tape2, Modality::Image);
  for (std::size_t k = 0; k < cfg.K; ++k) {
    CHECK(c.expert_forward(k, q2, tape2.constant(random_unit(rng, 2, cfg.D))).value().same_values(q2.value()));
  }
}

TEST_CASE("router weights lie on the simplex") {
  ControllerConfig cfg = small_config();
  cfg.K = 4;
  Controller c(cfg, 9);
  Rng rng(10);
  for (int i = 0; i < 1000; ++i) {
    Tape tape;
    const Tensor w = c.router_forward(tape.constant(random_unit(rng, 1, cfg.D))).value();
    REQUIRE(w.shape() == spider::numerics::Shape{1, 4});
    double s = 0.0;
    for (double v : w.data()) {
      CHECK(v > 0.0);
      s += v;
    }
    CHECK(std::abs(s - 1.0) <= 1e-12);
  }

  auto& w2 = c.params().router.w2;
  std::fill(w2.data().begin(), w2.data().end(), 0.0);
  Tape tape;
  const Tensor w = c.router_forward(tape.constant(random_unit(rng, 1, cfg.D))).value();
  for (double v : w.data()) CHECK(v == 0.25);

  Tape bad;
  CHECK_THROWS_AS(c.udp_forward(Modality::Image, bad.constant(Tensor(1, cfg.D + 1, 0.5))), spider::numerics::ShapeError);
}

TEST_CASE("udp_forward combines experts") {
  SUBCASE("K=1 equals the single expert") {
    ControllerConfig cfg = small_config();
    cfg.K = 1;
    Controller c(cfg, 4);
    Rng rng(6);
    Tape tape;
    const UdpResult r = c.udp_forward(Modality::Audio, tape.constant(random_unit(rng, 1, cfg.D)));
    CHECK(r.weights.value()[0] == 1.0);
    CHECK(r.q_bar.value().same_values(r.expert_outputs[0].value()));
  }
  SUBCASE("convex combination of expert outputs") {
    ControllerConfig cfg = small_config();
    cfg.K = 3;
    cfg.N[2] = 2;
    Controller c(cfg, 8);
    Rng rng(12);
    for (int i = 0; i < 100; ++i) {
      Tape tape;
      const UdpResult r = c.udp_forward(Modality::Video, tape.constant(random_unit(rng, 1, cfg.D)));
      const Tensor& qb = r.q_bar.value();
      for (std::size_t j = 0; j < qb.size(); ++j) {
        double lo = r.expert_outputs[0].value()[j], hi = lo;
        for (const Var& e : r.expert_outputs) {
          lo = std::min(lo, e.value()[j]);
          hi = std::max(hi, e.value()[j]);
        }
        CHECK(qb[j] >= lo - 1e-12);
        CHECK(qb[j] <= hi + 1e-12);
      }
    }
  }
}

TEST_CASE("tmf_forward") {
  SUBCASE("alpha 0 leaves T_e bit-exact") {
    ControllerConfig cfg = small_config();
    cfg.alpha = 0.0;
    Controller c(cfg, 2);
    Rng rng(3);
    for (int i = 0; i < 50; ++i) {
      const Tensor t_e = random_unit(rng, 1, cfg.D_c);
      const Tensor s = c.control_embedding(Modality::Image, random_unit(rng, 1, cfg.D), t_e);
      CHECK(s.same_values(t_e));
    }
  }
  SUBCASE("direct arithmetic") {
    ControllerConfig cfg;
    cfg.D = 2;
    cfg.D_c = 2;
    Controller c(cfg, 0);
    c.params().fuse[0] = Tensor{{0.0, 1.0}, {0.0, 0.0}};
    Tape tape;
    const Tensor s = c.tmf_forward(Modality::Image, tape.constant(Tensor{{1.0, 0.0}}), tape.constant(Tensor{{1.0, 0.0}})).value();
    CHECK(s[0] == 1.0);
    CHECK(s[1] == doctest::Approx(0.2).epsilon(1e-15));
  }
  SUBCASE("shape errors") {
    Controller c(small_config(), 0);
    Tape tape;
    CHECK_THROWS_AS(c.tmf_forward(Modality::Image, tape.constant(Tensor(1, 7, 1.0)), tape.constant(Tensor(1, 16, 1.0))),
                    spider::numerics::ShapeError);
  }
}

TEST_CASE("losses") {
  Tape tape;
  Var v = tape.constant(Tensor{{0.3, -0.4, 1.2}});
  CHECK(alignment_loss(v, v).item() == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(alignment_loss(v, affine(v, -1.0)).item() == doctest::Approx(2.0));
  CHECK(alignment_loss(tape.constant(Tensor{{1.0, 0.0}}), tape.constant(Tensor{{0.0, 1.0}})).item() == 1.0);
  CHECK(reconstruction_loss(affine(v, 2.0), v).item() == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(reconstruction_loss(tape.constant(Tensor{{1.0, 0.0}, {1.0, 0.0}}), tape.constant(Tensor{{0.0, 3.0}})).item() == 1.0);
  CHECK_THROWS_AS(alignment_loss(tape.constant(Tensor(1, 2, 0.0)), v), spider::numerics::ShapeError);
  CHECK_THROWS_AS(alignment_loss(tape.constant(Tensor(1, 3, 0.0)), v), spider::numerics::DegenerateVectorError);
}

TEST_CASE("total_loss") {
  ControllerConfig cfg = small_config();
  Controller c(cfg, 21);
  auto items = random_items(cfg, 22, 6);

  Tape t0;
  LossBreakdown b;
  const double loss = total_loss(t0, c, items, &b).item();
  CHECK(std::isfinite(loss));
  CHECK(loss >= 0.0);
  CHECK(loss == doctest::Approx(b.align + cfg.lambda_recon * b.recon));
  CHECK(evaluate(c, items).total == doctest::Approx(loss).epsilon(1e-12));

  Tape empty;
  CHECK_THROWS_AS(total_loss(empty, c, {}, nullptr), std::invalid_argument);

  ControllerConfig no_recon = cfg;
  no_recon.lambda_recon = 0.0;
  Controller c0(no_recon, 21);
  Tape t1;
  LossBreakdown b0;
  const double align_only = total_loss(t1, c0, items, &b0).item();
  CHECK(align_only == doctest::Approx(b0.align).epsilon(1e-15));

  ControllerConfig exact = cfg;
  exact.alpha = 0.0;
  Controller ce(exact, 23);
  for (auto& item : items) {
    const Tensor qb = ce.project(item.modality, item.m_e);
    item.e = Tensor(1, cfg.D);
    for (std::size_t j = 0; j < cfg.D; ++j) item.e[j] = qb[j];
  }
  Tape t2;
  CHECK(total_loss(t2, ce, items).item() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("full controller graph passes the gradient check") {
  const ControllerConfig cfg = small_config();
  for (std::uint64_t seed : {1, 2, 3}) {
    Controller c(cfg, seed);
    const auto items = random_items(cfg, seed + 100, 3);
    const auto params = c.params().named();
    const GraphBuilder build = [&](Tape& tape) { return total_loss(tape, c, items); };
    const auto report = grad_check(params, build);
    CAPTURE(report.worst_parameter);
    CHECK(report.max_relative_error <= 1e-4);
    CHECK(report.entries_checked > 5000);
  }
}

TEST_CASE("gradient check catches a corrupted backward rule") {
  const ControllerConfig cfg = small_config();
  Controller c(cfg, 4);
  const auto items = random_items(cfg, 104, 2);
  const auto params = c.params().named();
  const GraphBuilder build = [&](Tape& tape) { return total_loss(tape, c, items); };
  for (OpKind op : {OpKind::SoftmaxRows, OpKind::LayerNorm, OpKind::Tanh, OpKind::ScaleByEntry}) {
    spider::numerics::GradCheckOptions opts;
    opts.fault = op;
    const auto report = grad_check(params, build, opts);
    CAPTURE(spider::numerics::op_name(op));
    CHECK(report.max_relative_error > 1e-2);
    CHECK_FALSE(report.worst_parameter.empty());
  }
}

TEST_CASE("train_step") {
  const ControllerConfig cfg = small_config();
  const auto items = random_items(cfg, 31, 4);

  Controller a(cfg, 30), b(cfg, 30);
  Trainer ta(a), tb(b);
  const auto frozen = items;
  std::vector<double> trace_a, trace_b;
  for (int i = 0; i < 5; ++i) {
    trace_a.push_back(ta.train_step(items).total);
    trace_b.push_back(tb.train_step(items).total);
  }
  CHECK(trace_a == trace_b);
  CHECK(ta.state().step == 5);
  const auto pa = a.params().named(), pb = b.params().named();
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i].tensor->same_values(*pb[i].tensor));

  Controller fresh(cfg, 30);
  CHECK_FALSE(fresh.params().router.w1.same_values(a.params().router.w1));
  for (std::size_t i = 0; i < items.size(); ++i) {
    CHECK(items[i].t_e.same_values(frozen[i].t_e));
    CHECK(items[i].e.same_values(frozen[i].e));
    CHECK_FALSE(items[i].t_e.has_grad());
  }
}

TEST_CASE("train loop lowers the loss and is reproducible") {
  const ControllerConfig cfg = small_config();
  const auto items = random_items(cfg, 41, 24);
  TrainOptions opts;
  opts.steps = 150;
  opts.seed = 7;
  opts.adam.learning_rate = 1e-3;

  Controller c1(cfg, 40), c2(cfg, 40);
  const double before = evaluate(c1, items).total;
  std::vector<double> t1, t2;
  std::size_t last = 0;
  train(c1, items, opts, [&](std::size_t step, const LossBreakdown& b) {
    CHECK(step == last + 1);
    last = step;
    t1.push_back(b.total);
  });
  train(c2, items, opts, [&](std::size_t, const LossBreakdown& b) { t2.push_back(b.total); });
  CHECK(t1 == t2);
  CHECK(evaluate(c1, items).total < before);
}

TEST_CASE("checkpoint round trip") {
  const ControllerConfig cfg = small_config();
  Controller c(cfg, 77);
  Trainer(c).train_step(random_items(cfg, 78, 4));
  const auto p1 = temp_path("a.ckpt"), p2 = temp_path("b.ckpt");
  save_checkpoint(p1, c);

  const auto bytes = slurp(p1);
  REQUIRE(bytes.size() > 16);
  CHECK(std::string(bytes.begin(), bytes.begin() + 8) == "SPDRCKPT");
  CHECK(bytes[8] == 1);
  CHECK(bytes[9] == 0);

  Controller loaded = load_checkpoint(p1);
  const auto a = c.params().named(), b = loaded.params().named();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].tensor->same_values(*b[i].tensor));
  save_checkpoint(p2, loaded);
  CHECK(slurp(p2) == bytes);
  CHECK(load_checkpoint(p1, cfg).config() == cfg);

  SUBCASE("dimension mismatch") {
    ControllerConfig wide = cfg;
    wide.D = 32;
    try {
      load_checkpoint(p1, wide);
      FAIL("expected a dimension mismatch");
    } catch (const CheckpointError& e) {
      CHECK(e.kind() == CheckpointErrorKind::DimMismatch);
    }
    std::filesystem::remove(spider::controller::config_path_for(p1));
    try {
      load_checkpoint(p1, wide);
      FAIL("expected a dimension mismatch");
    } catch (const CheckpointError& e) {
      CHECK(e.kind() == CheckpointErrorKind::DimMismatch);
      CHECK(std::string(e.what()).find("mquery.IMAGE") != std::string::npos);
    }
  }
  SUBCASE("truncated file") {
    std::ofstream(p1, std::ios::binary | std::ios::trunc).write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 5));
    try {
      load_checkpoint(p1);
      FAIL("expected truncation");
    } catch (const CheckpointError& e) {
      CHECK(e.kind() == CheckpointErrorKind::Truncated);
    }
  }
  SUBCASE("version mismatch") {
    auto copy = bytes;
    copy[8] = 2;
    std::ofstream(p1, std::ios::binary | std::ios::trunc).write(copy.data(), static_cast<std::streamsize>(copy.size()));
    try {
      load_checkpoint(p1);
      FAIL("expected version mismatch");
    } catch (const CheckpointError& e) {
      CHECK(e.kind() == CheckpointErrorKind::VersionMismatch);
    }
  }
  SUBCASE("bad magic") {
    auto copy = bytes;
    copy[0] = 'X';
    std::ofstream(p1, std::ios::binary | std::ios::trunc).write(copy.data(), static_cast<std::streamsize>(copy.size()));
    CHECK_THROWS_AS(load_checkpoint(p1), CheckpointError);
  }
  std::filesystem::remove(p1);
  std::filesystem::remove(p2);
  std::filesystem::remove(spider::controller::config_path_for(p1));
  std::filesystem::remove(spider::controller::config_path_for(p2));
}
