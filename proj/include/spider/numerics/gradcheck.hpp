#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>

#include "spider/numerics/autodiff.hpp"

namespace spider::numerics {

struct NamedTensor {
  std::string name;
  Tensor* tensor = nullptr;
};

/// Records a scalar loss on the given tape. Must be a pure function of the
/// bound parameter values so repeated evaluation is reproducible.
using GraphBuilder = std::function<Var(Tape&)>;

struct GradCheckOptions {
  double epsilon = 1e-5;
  /// Relative errors are |a - n| / max(|a|, |n|, denominator_floor).
  double denominator_floor = 1e-6;
  /// Optional mutation applied to the analytic pass only.
  std::optional<OpKind> fault;
  double fault_factor = 1.1;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t entries_checked = 0;
};

/// Compares tape gradients against central differences for every entry of
/// every parameter that requires grad. Parameter values are restored and
/// their grad slots cleared on return.
GradCheckReport grad_check(std::span<const NamedTensor> params, const GraphBuilder& build,
                           const GradCheckOptions& options = {});

}  // namespace spider::numerics
