#include "spider/numerics/adam.hpp"

#include <cmath>

namespace spider::numerics {

AdamState make_adam_state(std::span<Tensor* const> params, AdamOptions options) {
  AdamState state;
  state.options = options;
  state.first_moment.reserve(params.size());
  state.second_moment.reserve(params.size());
  for (const Tensor* p : params) {
    state.first_moment.emplace_back(p->size(), 0.0);
    state.second_moment.emplace_back(p->size(), 0.0);
  }
  return state;
}

void adam_step(std::span<Tensor* const> params, AdamState& state) {
  if (params.size() != state.first_moment.size()) {
    throw ShapeError("adam_step: " + std::to_string(params.size()) + " parameters but state tracks " +
                     std::to_string(state.first_moment.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->size() != state.first_moment[i].size()) {
      throw ShapeError("adam_step: parameter " + std::to_string(i) + " has shape " +
                       to_string(params[i]->shape()) + " but moments hold " +
                       std::to_string(state.first_moment[i].size()) + " entries");
    }
  }

  const AdamOptions& o = state.options;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(o.beta1, t);
  const double correction2 = 1.0 - std::pow(o.beta2, t);

  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    auto data = p.data();
    const auto grad = p.grad();
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    for (std::size_t j = 0; j < data.size(); ++j) {
      const double g = grad.empty() ? 0.0 : grad[j];
      m[j] = o.beta1 * m[j] + (1.0 - o.beta1) * g;
      v[j] = o.beta2 * v[j] + (1.0 - o.beta2) * g * g;
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      data[j] -= o.learning_rate * (m_hat / (std::sqrt(v_hat) + o.epsilon) + o.weight_decay * data[j]);
    }
  }
}

}  // namespace spider::numerics
