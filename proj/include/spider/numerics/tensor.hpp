#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace spider::numerics {

struct Shape {
  std::size_t rows = 0;
  std::size_t cols = 0;

  [[nodiscard]] constexpr std::size_t size() const noexcept { return rows * cols; }
  friend constexpr bool operator==(Shape, Shape) = default;
};

std::string to_string(Shape s);

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
  ShapeError(std::string_view op, Shape a, Shape b);
};

class DegenerateVectorError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Dense row-major matrix of doubles with an optional gradient slot.
///
/// Rank is at most two; vectors are 1 x n. The gradient slot is allocated
/// lazily on first accumulation and always matches the data length.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0);
  Tensor(std::size_t rows, std::size_t cols, std::vector<double> data);
  Tensor(std::initializer_list<std::initializer_list<double>> rows);

  static Tensor row(std::span<const double> values);
  static Tensor scalar(double value) { return Tensor(1, 1, value); }
  static Tensor identity(std::size_t n);

  [[nodiscard]] Shape shape() const noexcept { return shape_; }
  [[nodiscard]] std::size_t rows() const noexcept { return shape_.rows; }
  [[nodiscard]] std::size_t cols() const noexcept { return shape_.cols; }
  [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }

  [[nodiscard]] std::span<double> data() noexcept { return data_; }
  [[nodiscard]] std::span<const double> data() const noexcept { return data_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * shape_.cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * shape_.cols + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  [[nodiscard]] bool requires_grad() const noexcept { return requires_grad_; }
  Tensor& set_requires_grad(bool on) noexcept {
    requires_grad_ = on;
    return *this;
  }

  [[nodiscard]] bool has_grad() const noexcept { return !grad_.empty(); }
  [[nodiscard]] std::span<const double> grad() const noexcept { return grad_; }
  [[nodiscard]] std::span<double> grad() noexcept { return grad_; }
  void accumulate_grad(std::span<const double> g);
  void zero_grad() noexcept { grad_.clear(); }

  [[nodiscard]] bool all_finite() const noexcept;

  /// Bitwise equality of shape and data; the gradient slot is ignored.
  [[nodiscard]] bool same_values(const Tensor& other) const noexcept;

 private:
  Shape shape_{};
  std::vector<double> data_;
  std::vector<double> grad_;
  bool requires_grad_ = false;
};

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);
/// Returns v / ||v||; throws DegenerateVectorError when ||v|| <= 1e-12.
Tensor normalized(const Tensor& v);
/// Plain (tape-free) cosine similarity of two equally sized vectors.
double cosine(std::span<const double> a, std::span<const double> b);

}  // namespace spider::numerics
