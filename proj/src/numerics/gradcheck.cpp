#include "spider/numerics/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace spider::numerics {

namespace {

double evaluate(const GraphBuilder& build) {
  Tape tape;
  return build(tape).item();
}

}  // namespace

GradCheckReport grad_check(std::span<const NamedTensor> params, const GraphBuilder& build,
                           const GradCheckOptions& options) {
  for (const auto& p : params) p.tensor->zero_grad();

  std::vector<std::vector<double>> analytic;
  {
    Tape tape;
    if (options.fault) tape.inject_fault(*options.fault, options.fault_factor);
    Var loss = build(tape);
    tape.backward(loss);
    for (const auto& p : params) {
      if (p.tensor->has_grad()) {
        analytic.emplace_back(p.tensor->grad().begin(), p.tensor->grad().end());
      } else {
        analytic.emplace_back(p.tensor->size(), 0.0);
      }
      p.tensor->zero_grad();
    }
  }

  GradCheckReport report;
  report.max_relative_error = -1.0;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& t = *params[pi].tensor;
    if (!t.requires_grad()) continue;
    auto data = t.data();
    for (std::size_t j = 0; j < data.size(); ++j) {
      const double saved = data[j];
      data[j] = saved + options.epsilon;
      const double plus = evaluate(build);
      data[j] = saved - options.epsilon;
      const double minus = evaluate(build);
      data[j] = saved;

      const double numeric = (plus - minus) / (2.0 * options.epsilon);
      const double a = analytic[pi][j];
      const double denom = std::max({std::abs(a), std::abs(numeric), options.denominator_floor});
      const double rel = std::abs(a - numeric) / denom;
      ++report.entries_checked;
      if (rel > report.max_relative_error) {
        report.max_relative_error = rel;
        report.worst_parameter = params[pi].name;
        report.worst_index = j;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  if (report.max_relative_error < 0.0) report.max_relative_error = 0.0;
  return report;
}

}  // namespace spider::numerics
