#include "spider/controller/controller.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "spider/numerics/random.hpp"

namespace spider::controller {

using namespace numerics;

namespace {

Tensor uniform_weight(Rng& rng, std::size_t fan_in, std::size_t fan_out) {
  Tensor t(fan_in, fan_out);
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (double& v : t.data()) v = rng.uniform(-bound, bound);
  t.set_requires_grad(true);
  return t;
}

Tensor filled(std::size_t rows, std::size_t cols, double value) {
  Tensor t(rows, cols, value);
  t.set_requires_grad(true);
  return t;
}

std::string mname(Modality m) { return std::string(templ::modality_name(m)); }

}  // namespace

std::vector<NamedTensor> ControllerParams::named() {
  std::vector<NamedTensor> out;
  for (Modality m : templ::kAllModalities) out.push_back({"mquery." + mname(m), &mquery[templ::modality_index(m)]});
  for (std::size_t k = 0; k < experts.size(); ++k) {
    for (std::size_t l = 0; l < experts[k].layers.size(); ++l) {
      auto& layer = experts[k].layers[l];
      const std::string p = "expert." + std::to_string(k) + ".layer." + std::to_string(l) + ".";
      out.push_back({p + "ln1.gain", &layer.ln1_gain});
      out.push_back({p + "ln1.bias", &layer.ln1_bias});
      out.push_back({p + "attn.wq", &layer.wq});
      out.push_back({p + "attn.wk", &layer.wk});
      out.push_back({p + "attn.wv", &layer.wv});
      out.push_back({p + "attn.wo", &layer.wo});
      out.push_back({p + "ln2.gain", &layer.ln2_gain});
      out.push_back({p + "ln2.bias", &layer.ln2_bias});
      out.push_back({p + "ffn.in", &layer.ffn_in});
      out.push_back({p + "ffn.out", &layer.ffn_out});
    }
  }
  out.push_back({"router.w1", &router.w1});
  out.push_back({"router.b1", &router.b1});
  out.push_back({"router.w2", &router.w2});
  out.push_back({"router.b2", &router.b2});
  for (Modality m : templ::kAllModalities) out.push_back({"fuse." + mname(m), &fuse[templ::modality_index(m)]});
  return out;
}

std::vector<Tensor*> ControllerParams::all() {
  std::vector<Tensor*> out;
  for (auto& nt : named()) out.push_back(nt.tensor);
  return out;
}

Controller::Controller(ControllerConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  const std::size_t D = config_.D;
  const Rng root(seed);

  Rng q_rng = root.substream("init.mquery");
  for (Modality m : templ::kAllModalities) {
    Tensor q(config_.n_of(m), D);
    for (double& v : q.data()) v = q_rng.normal(0.0, 0.02);
    q.set_requires_grad(true);
    params_.mquery[templ::modality_index(m)] = std::move(q);
  }

  for (std::size_t k = 0; k < config_.K; ++k) {
    Rng rng = root.substream("init.expert." + std::to_string(k));
    ProjectionExpert expert;
    for (std::size_t l = 0; l < config_.expert_layers; ++l) {
      ExpertLayer layer;
      layer.ln1_gain = filled(1, D, 1.0);
      layer.ln1_bias = filled(1, D, 0.0);
      layer.wq = uniform_weight(rng, D, D);
      layer.wk = uniform_weight(rng, D, D);
      layer.wv = uniform_weight(rng, D, D);
      layer.wo = uniform_weight(rng, D, D);
      layer.ln2_gain = filled(1, D, 1.0);
      layer.ln2_bias = filled(1, D, 0.0);
      layer.ffn_in = uniform_weight(rng, D, 4 * D);
      layer.ffn_out = uniform_weight(rng, 4 * D, D);
      expert.layers.push_back(std::move(layer));
    }
    params_.experts.push_back(std::move(expert));
  }

  Rng r_rng = root.substream("init.router");
  params_.router.w1 = uniform_weight(r_rng, D, config_.router_hidden);
  params_.router.b1 = filled(1, config_.router_hidden, 0.0);
  params_.router.w2 = uniform_weight(r_rng, config_.router_hidden, config_.K);
  params_.router.b2 = filled(1, config_.K, 0.0);

  Rng f_rng = root.substream("init.fuse");
  for (Modality m : templ::kAllModalities) {
    params_.fuse[templ::modality_index(m)] = uniform_weight(f_rng, D, config_.D_c);
  }
}

void Controller::check_m_e(Modality m, const Var& m_e) const {
  const Shape want{config_.l_of(m), config_.D};
  if (m_e.shape() != want) throw ShapeError("M-Prompt hidden state for " + mname(m), want, m_e.shape());
}

Var Controller::mquery(Tape& tape, Modality m) const {
  return tape.leaf(params_.mquery[templ::modality_index(m)]);
}

Var Controller::expert_forward(std::size_t k, Var q, Var m_e) const {
  if (k >= params_.experts.size()) {
    throw std::out_of_range("expert index " + std::to_string(k) + " >= K=" + std::to_string(params_.experts.size()));
  }
  const std::size_t D = config_.D;
  if (q.shape().cols != D) throw ShapeError("expert_forward M-Query", Shape{q.shape().rows, D}, q.shape());
  if (m_e.shape().cols != D) throw ShapeError("expert_forward M_e", Shape{m_e.shape().rows, D}, m_e.shape());
  Tape& tape = q.tape();
  const std::size_t n = q.shape().rows;
  const double scale = 1.0 / std::sqrt(static_cast<double>(D));

  Var x = concat_rows(q, m_e);
  for (const ExpertLayer& layer : params_.experts[k].layers) {
    Var h = layer_norm(x, tape.leaf(layer.ln1_gain), tape.leaf(layer.ln1_bias));
    Var qh = matmul(h, tape.leaf(layer.wq));
    Var kh = matmul(h, tape.leaf(layer.wk));
    Var vh = matmul(h, tape.leaf(layer.wv));
    Var att = softmax_rows(affine(matmul(qh, transpose(kh)), scale));
    x = add(x, matmul(matmul(att, vh), tape.leaf(layer.wo)));

    Var h2 = layer_norm(x, tape.leaf(layer.ln2_gain), tape.leaf(layer.ln2_bias));
    x = add(x, matmul(tanh(matmul(h2, tape.leaf(layer.ffn_in))), tape.leaf(layer.ffn_out)));
  }
  return slice_rows(x, 0, n);
}

Var Controller::router_forward(Var m_e) const {
  if (m_e.shape().cols != config_.D) throw ShapeError("router_forward M_e", Shape{m_e.shape().rows, config_.D}, m_e.shape());
  Tape& tape = m_e.tape();
  const auto& r = params_.router;
  Var pooled = mean_rows(m_e);
  Var hidden = tanh(add_row(matmul(pooled, tape.leaf(r.w1)), tape.leaf(r.b1)));
  return softmax_row(add_row(matmul(hidden, tape.leaf(r.w2)), tape.leaf(r.b2)));
}

UdpResult Controller::udp_forward(Modality m, Var m_e) const {
  check_m_e(m, m_e);
  Tape& tape = m_e.tape();
  UdpResult out;
  out.weights = router_forward(m_e);
  Var q = mquery(tape, m);
  for (std::size_t k = 0; k < config_.K; ++k) {
    Var expert = expert_forward(k, q, m_e);
    out.expert_outputs.push_back(expert);
    Var weighted = scale_by_entry(expert, out.weights, k);
    out.q_bar = k == 0 ? weighted : add(out.q_bar, weighted);
  }
  return out;
}

Var Controller::tmf_forward(Modality m, Var t_e, Var q_bar) const {
  const Shape te_shape{1, config_.D_c};
  if (t_e.shape() != te_shape) throw ShapeError("tmf_forward T_e", te_shape, t_e.shape());
  const Shape qb_shape{config_.n_of(m), config_.D};
  if (q_bar.shape() != qb_shape) throw ShapeError("tmf_forward Q_bar", qb_shape, q_bar.shape());
  Tape& tape = t_e.tape();
  Var pooled = mean_rows(matmul(q_bar, tape.leaf(params_.fuse[templ::modality_index(m)])));
  return add(t_e, affine(pooled, config_.alpha));
}

Tensor Controller::project(Modality m, const Tensor& m_e) const {
  Tape tape;
  return udp_forward(m, tape.constant(m_e)).q_bar.value();
}

Tensor Controller::control_embedding(Modality m, const Tensor& m_e, const Tensor& t_e) const {
  Tape tape;
  Var q_bar = udp_forward(m, tape.constant(m_e)).q_bar;
  return tmf_forward(m, tape.constant(t_e), q_bar).value();
}

Var alignment_loss(Var s, Var t_e) { return affine(cosine_similarity(s, t_e), -1.0, 1.0); }

Var reconstruction_loss(Var q_bar, Var e) { return affine(cosine_similarity(mean_rows(q_bar), e), -1.0, 1.0); }

Var total_loss(Tape& tape, const Controller& c, std::span<const TrainingItem> batch, LossBreakdown* breakdown) {
  if (batch.empty()) throw std::invalid_argument("total_loss needs a non-empty batch");
  const double inv = 1.0 / static_cast<double>(batch.size());
  const double lambda = c.config().lambda_recon;
  Var acc;
  LossBreakdown b;
  for (const TrainingItem& item : batch) {
    Var m_e = tape.constant(item.m_e);
    Var t_e = tape.constant(item.t_e);
    Var e = tape.constant(item.e);
    Var q_bar = c.udp_forward(item.modality, m_e).q_bar;
    Var s = c.tmf_forward(item.modality, t_e, q_bar);
    Var align = alignment_loss(s, t_e);
    Var recon = reconstruction_loss(q_bar, e);
    Var term = lambda == 0.0 ? align : add(align, affine(recon, lambda));
    acc = acc.valid() ? add(acc, term) : term;
    b.align += align.item();
    b.recon += recon.item();
  }
  b.align *= inv;
  b.recon *= inv;
  b.mean_cos_align = 1.0 - b.align;
  b.mean_cos_recon = 1.0 - b.recon;
  Var loss = affine(acc, inv);
  b.total = loss.item();
  if (breakdown) *breakdown = b;
  return loss;
}

LossBreakdown evaluate(const Controller& c, std::span<const TrainingItem> items) {
  LossBreakdown sum;
  for (const TrainingItem& item : items) {
    Tape tape;
    LossBreakdown b;
    total_loss(tape, c, std::span<const TrainingItem>(&item, 1), &b);
    sum.total += b.total;
    sum.align += b.align;
    sum.recon += b.recon;
  }
  const double inv = items.empty() ? 0.0 : 1.0 / static_cast<double>(items.size());
  sum.total *= inv;
  sum.align *= inv;
  sum.recon *= inv;
  sum.mean_cos_align = 1.0 - sum.align;
  sum.mean_cos_recon = 1.0 - sum.recon;
  return sum;
}

Trainer::Trainer(Controller& controller, AdamOptions options)
    : controller_(controller), params_(controller.params().all()), state_(make_adam_state(params_, options)) {}

LossBreakdown Trainer::train_step(std::span<const TrainingItem> batch) {
  for (Tensor* p : params_) p->zero_grad();
  Tape tape;
  LossBreakdown b;
  Var loss = total_loss(tape, controller_, batch, &b);
  tape.backward(loss);
  adam_step(params_, state_);
  return b;
}

void train(Controller& controller, std::span<const TrainingItem> items, const TrainOptions& options,
           const std::function<void(std::size_t, const LossBreakdown&)>& on_step) {
  if (items.empty()) throw std::invalid_argument("train needs at least one item");
  if (options.batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
  Trainer trainer(controller, options.adam);
  Rng rng = Rng(options.seed).substream("batch");
  std::vector<std::size_t> order(items.size());
  std::size_t cursor = order.size();
  std::vector<TrainingItem> batch;
  for (std::size_t step = 1; step <= options.steps; ++step) {
    batch.clear();
    while (batch.size() < options.batch_size) {
      if (cursor == order.size()) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.uniform_index(i)]);
        cursor = 0;
      }
      batch.push_back(items[order[cursor++]]);
    }
    const LossBreakdown b = trainer.train_step(batch);
    if (on_step) on_step(step, b);
  }
}

ControllerConfig gradcheck_config() {
  ControllerConfig c;
  c.D = 16;
  c.D_c = 8;
  c.router_hidden = 8;
  return c;
}

std::vector<TrainingItem> random_training_items(const ControllerConfig& c, std::uint64_t seed, std::size_t n) {
  Rng rng = Rng(seed).substream("verify.items");
  auto unit = [&rng](std::size_t rows, std::size_t cols) {
    Tensor t(rows, cols);
    for (double& v : t.data()) v = rng.normal();
    const double norm = l2_norm(t.data());
    for (double& v : t.data()) v /= norm;
    return t;
  };
  std::vector<TrainingItem> items;
  for (std::size_t i = 0; i < n; ++i) {
    const Modality m = templ::kAllModalities[i % 3];
    Tensor m_e = unit(c.l_of(m), c.D);
    Tensor t_e = unit(1, c.D_c);
    items.push_back({m, std::move(m_e), std::move(t_e), unit(1, c.D)});
  }
  return items;
}

GradCheckReport check_controller_gradients(const ControllerConfig& c, std::uint64_t seed,
                                           const GradCheckOptions& options) {
  Controller controller(c, seed);
  const auto items = random_training_items(c, seed, 3);
  const auto params = controller.params().named();
  return grad_check(params, [&](Tape& tape) { return total_loss(tape, controller, items); }, options);
}

}  // namespace spider::controller
