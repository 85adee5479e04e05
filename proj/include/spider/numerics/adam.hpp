#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "spider/numerics/tensor.hpp"

namespace spider::numerics {

/// Optimizer hyperparameters. Learning rate and weight decay default to the
/// controller training recipe (Adam, lr 1e-4, weight decay 1e-3).
struct AdamOptions {
  double learning_rate = 1e-4;
  double weight_decay = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamOptions options;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  std::uint64_t step = 0;
};

/// Allocates zero moments matching `params`.
AdamState make_adam_state(std::span<Tensor* const> params, AdamOptions options = {});

/// One Adam step with bias-corrected moments and decoupled weight decay:
///   p -= lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * p)
/// A parameter without an allocated gradient is treated as having a zero
/// gradient. Gradients are left untouched; callers zero them between steps.
void adam_step(std::span<Tensor* const> params, AdamState& state);

}  // namespace spider::numerics
