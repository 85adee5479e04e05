#include "spider/numerics/tensor.hpp"

#include <cmath>
#include <cstring>

namespace spider::numerics {

std::string to_string(Shape s) {
  return "[" + std::to_string(s.rows) + "x" + std::to_string(s.cols) + "]";
}

ShapeError::ShapeError(std::string_view op, Shape a, Shape b)
    : std::invalid_argument(std::string(op) + ": incompatible shapes " + to_string(a) +
                            " and " + to_string(b)) {}

Tensor::Tensor(std::size_t rows, std::size_t cols, double fill)
    : shape_{rows, cols}, data_(rows * cols, fill) {
  if (rows == 0 || cols == 0) throw ContractError("tensor dimensions must be positive");
}

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> data)
    : shape_{rows, cols}, data_(std::move(data)) {
  if (rows == 0 || cols == 0) throw ContractError("tensor dimensions must be positive");
  if (data_.size() != rows * cols) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                     " does not match " + to_string(shape_));
  }
}

Tensor::Tensor(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  if (r == 0 || c == 0) throw ContractError("tensor dimensions must be positive");
  shape_ = {r, c};
  data_.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("ragged tensor literal");
    data_.insert(data_.end(), row.begin(), row.end());
  }
}

Tensor Tensor::row(std::span<const double> values) {
  return Tensor(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t(n, n);
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

void Tensor::accumulate_grad(std::span<const double> g) {
  if (g.size() != data_.size()) {
    throw ShapeError("gradient length " + std::to_string(g.size()) + " does not match " +
                     to_string(shape_));
  }
  if (grad_.empty()) grad_.assign(data_.size(), 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) grad_[i] += g[i];
}

bool Tensor::all_finite() const noexcept {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  for (double v : grad_)
    if (!std::isfinite(v)) return false;
  return true;
}

bool Tensor::same_values(const Tensor& other) const noexcept {
  return shape_ == other.shape_ &&
         (data_.empty() ||
          std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(double)) == 0);
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

Tensor normalized(const Tensor& v) {
  const double n = l2_norm(v.data());
  if (n <= 1e-12) throw DegenerateVectorError("cannot normalize a zero-norm vector");
  Tensor out = v;
  out.zero_grad();
  for (double& x : out.data()) x /= n;
  return out;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (na <= 1e-12 || nb <= 1e-12) throw DegenerateVectorError("cosine of a zero-norm vector");
  return dot(a, b) / (na * nb);
}

}  // namespace spider::numerics
