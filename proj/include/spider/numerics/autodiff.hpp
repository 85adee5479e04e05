#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "spider/numerics/tensor.hpp"

namespace spider::numerics {

enum class OpKind : std::uint8_t {
  Leaf,
  MatMul,
  Add,
  AddRow,
  Sub,
  Hadamard,
  Affine,
  Tanh,
  SoftmaxRows,
  Transpose,
  ConcatRows,
  SliceRows,
  MeanRows,
  LayerNorm,
  Cosine,
  Sum,
  ScaleByEntry,
};

std::string_view op_name(OpKind kind) noexcept;

class Tape;

/// Handle to a value recorded on a `Tape`. Cheap to copy; valid while the
/// tape is alive.
class Var {
 public:
  Var() = default;

  [[nodiscard]] const Tensor& value() const;
  [[nodiscard]] Shape shape() const { return value().shape(); }
  /// Value of a 1 x 1 result.
  [[nodiscard]] double item() const;
  [[nodiscard]] Tape& tape() const { return *tape_; }
  [[nodiscard]] std::size_t id() const noexcept { return id_; }
  [[nodiscard]] bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode recording of one forward pass.
///
/// Leaves bound with `leaf()` reference external tensors; after `backward()`
/// gradients are accumulated into the grad slot of every bound tensor whose
/// `requires_grad()` is set. A tape can be replayed backward once.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::span<const double> upstream)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// Binds an external tensor. Binding the same tensor twice returns the same
  /// node, so fan-out gradients accumulate on one leaf.
  Var leaf(const Tensor& tensor);

  void backward(Var loss);

  /// Gradient of the loss with respect to a recorded value, after backward().
  /// Empty when the value does not influence any trainable leaf.
  [[nodiscard]] std::span<const double> grad(Var v) const;

  /// Test hook: scales the upstream gradient entering every op of `kind` by
  /// `factor` during backward. Used to prove the gradient checker detects
  /// wrong derivative rules.
  void inject_fault(OpKind kind, double factor) noexcept { fault_ = Fault{kind, factor}; }

  [[nodiscard]] std::size_t size() const noexcept { return nodes_.size(); }
  [[nodiscard]] std::size_t backward_visits() const noexcept { return visits_; }

  // Op-author interface.
  Var record(OpKind kind, Tensor value, std::vector<std::size_t> inputs, BackwardFn fn);
  [[nodiscard]] const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  [[nodiscard]] bool needs_grad(std::size_t id) const { return nodes_.at(id).needs_grad; }
  /// Adds `g` into the gradient of node `id` (no-op for nodes not needing grad).
  void accumulate(std::size_t id, std::span<const double> g);
  /// Mutable gradient buffer of node `id`, allocated on demand.
  std::span<double> grad_buffer(std::size_t id);

 private:
  friend class Var;

  struct Node {
    OpKind kind = OpKind::Leaf;
    Tensor value;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    std::vector<double> grad;
    Tensor* bound = nullptr;
    bool needs_grad = false;
  };
  struct Fault {
    OpKind kind;
    double factor;
  };

  std::vector<Node> nodes_;
  std::unordered_map<const Tensor*, std::size_t> leaves_;
  std::optional<Fault> fault_;
  std::size_t visits_ = 0;
  bool consumed_ = false;
};

Var matmul(Var a, Var b);
Var add(Var a, Var b);
/// x [n x d] + row [1 x d], broadcast over rows.
Var add_row(Var x, Var row);
Var sub(Var a, Var b);
Var hadamard(Var a, Var b);
/// scale * x + shift, elementwise with constants.
Var affine(Var x, double scale, double shift = 0.0);
Var tanh(Var x);
/// Row-wise softmax with max subtraction.
Var softmax_rows(Var x);
/// Softmax of a single row vector [1 x K].
Var softmax_row(Var x);
Var transpose(Var x);
Var concat_rows(Var top, Var bottom);
Var slice_rows(Var x, std::size_t begin, std::size_t count);
/// Mean over rows: [n x d] -> [1 x d].
Var mean_rows(Var x);
/// Per-row normalization to zero mean and unit variance (eps 1e-5), then
/// gain/bias. Requires d >= 2.
Var layer_norm(Var x, Var gain, Var bias);
/// Cosine similarity of two equally shaped tensors, as a [1 x 1] value.
/// Throws DegenerateVectorError when either norm is <= 1e-12.
Var cosine_similarity(Var u, Var v);
Var sum(Var x);
/// x * s[index], where s is any tensor and index addresses its data.
Var scale_by_entry(Var x, Var s, std::size_t index);

inline constexpr double kLayerNormEps = 1e-5;

}  // namespace spider::numerics
