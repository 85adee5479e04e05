#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "spider/controller/config.hpp"
#include "spider/numerics/adam.hpp"
#include "spider/numerics/autodiff.hpp"
#include "spider/numerics/gradcheck.hpp"

namespace spider::controller {

using numerics::Tape;
using numerics::Tensor;
using numerics::Var;

/// One pre-norm transformer layer: single-head self-attention and a tanh FFN,
/// each wrapped in a residual connection.
struct ExpertLayer {
  Tensor ln1_gain, ln1_bias;
  Tensor wq, wk, wv, wo;  // D x D
  Tensor ln2_gain, ln2_bias;
  Tensor ffn_in;   // D x 4D
  Tensor ffn_out;  // 4D x D
};

struct ProjectionExpert {
  std::vector<ExpertLayer> layers;
};

/// Two-layer MLP on the mean-pooled M-Prompt hidden states.
struct ModalityRouter {
  Tensor w1, b1;  // D x H, 1 x H
  Tensor w2, b2;  // H x K, 1 x K
};

struct ControllerParams {
  std::array<Tensor, templ::kModalityCount> mquery;  // N^X x D
  std::vector<ProjectionExpert> experts;
  ModalityRouter router;
  std::array<Tensor, templ::kModalityCount> fuse;  // D x D_c

  /// Every trainable tensor with a stable dotted name, in checkpoint order.
  std::vector<numerics::NamedTensor> named();
  std::vector<Tensor*> all();
};

/// Per-call pieces of the projector, kept for inspection in tests.
struct UdpResult {
  Var q_bar;
  Var weights;
  std::vector<Var> expert_outputs;
};

class Controller {
 public:
  /// Weights ~ uniform(+-1/sqrt(fan_in)), M-Queries ~ normal(0, 0.02),
  /// biases 0, layer-norm gains 1.
  Controller(ControllerConfig config, std::uint64_t seed);

  [[nodiscard]] const ControllerConfig& config() const noexcept { return config_; }
  [[nodiscard]] ControllerParams& params() noexcept { return params_; }
  [[nodiscard]] const ControllerParams& params() const noexcept { return params_; }

  /// Runs expert k over [Q; M_e] and returns the first N rows.
  Var expert_forward(std::size_t k, Var q, Var m_e) const;
  /// Softmax routing weights [1 x K].
  Var router_forward(Var m_e) const;
  UdpResult udp_forward(Modality m, Var m_e) const;
  /// S = T_e + alpha * mean_rows(Q_bar f_L).
  Var tmf_forward(Modality m, Var t_e, Var q_bar) const;

  /// M-Query of a modality bound as a trainable leaf.
  Var mquery(Tape& tape, Modality m) const;

  // Tape-free inference helpers.
  Tensor project(Modality m, const Tensor& m_e) const;
  Tensor control_embedding(Modality m, const Tensor& m_e, const Tensor& t_e) const;

 private:
  void check_m_e(Modality m, const Var& m_e) const;

  ControllerConfig config_;
  ControllerParams params_;
};

/// 1 - cos(S, T_e).
Var alignment_loss(Var s, Var t_e);
/// 1 - cos(mean_rows(Q_bar), E).
Var reconstruction_loss(Var q_bar, Var e);

/// One supervised example for the controller; all three tensors are frozen.
struct TrainingItem {
  Modality modality = Modality::Image;
  Tensor m_e;  // L x D
  Tensor t_e;  // 1 x D_c
  Tensor e;    // 1 x D
};

struct LossBreakdown {
  double total = 0.0;
  double align = 0.0;
  double recon = 0.0;
  double mean_cos_align = 0.0;
  double mean_cos_recon = 0.0;
};

/// Mean over the batch of alignment + lambda_recon * reconstruction. Fills
/// `breakdown` when given. Throws std::invalid_argument on an empty batch.
Var total_loss(Tape& tape, const Controller& c, std::span<const TrainingItem> batch,
               LossBreakdown* breakdown = nullptr);

/// Loss statistics without touching gradients.
LossBreakdown evaluate(const Controller& c, std::span<const TrainingItem> items);

class Trainer {
 public:
  explicit Trainer(Controller& controller, numerics::AdamOptions options = {});

  /// forward -> backward -> Adam over every controller parameter. Returns
  /// the pre-step loss of the batch.
  LossBreakdown train_step(std::span<const TrainingItem> batch);

  [[nodiscard]] const numerics::AdamState& state() const noexcept { return state_; }

 private:
  Controller& controller_;
  std::vector<Tensor*> params_;
  numerics::AdamState state_;
};

struct TrainOptions {
  std::size_t steps = 500;
  std::size_t batch_size = 4;
  std::uint64_t seed = 0;
  numerics::AdamOptions adam{};
};

/// Mini-batch loop; the item order is reshuffled every epoch from the
/// "batch" substream of `seed`. `on_step(step, loss)` is called with 1-based
/// steps.
void train(Controller& controller, std::span<const TrainingItem> items, const TrainOptions& options,
           const std::function<void(std::size_t, const LossBreakdown&)>& on_step = {});

/// Configuration used by the full-graph gradient check: D=16, D_c=8,
/// router hidden 8, other fields at their defaults.
ControllerConfig gradcheck_config();

/// `n` items of random unit vectors; modalities cycle over IMAGE, AUDIO, VIDEO.
std::vector<TrainingItem> random_training_items(const ControllerConfig& c, std::uint64_t seed, std::size_t n);

/// Central-difference check of total_loss over every controller parameter,
/// for a controller initialized from `seed` on three random items.
numerics::GradCheckReport check_controller_gradients(const ControllerConfig& c, std::uint64_t seed,
                                                     const numerics::GradCheckOptions& options = {});

}  // namespace spider::controller
