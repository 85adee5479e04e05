#include "spider/numerics/autodiff.hpp"

#include <algorithm>
#include <cmath>

namespace spider::numerics {

std::string_view op_name(OpKind kind) noexcept {
  switch (kind) {
    case OpKind::Leaf: return "leaf";
    case OpKind::MatMul: return "matmul";
    case OpKind::Add: return "add";
    case OpKind::AddRow: return "add_row";
    case OpKind::Sub: return "sub";
    case OpKind::Hadamard: return "hadamard";
    case OpKind::Affine: return "affine";
    case OpKind::Tanh: return "tanh";
    case OpKind::SoftmaxRows: return "softmax_rows";
    case OpKind::Transpose: return "transpose";
    case OpKind::ConcatRows: return "concat_rows";
    case OpKind::SliceRows: return "slice_rows";
    case OpKind::MeanRows: return "mean_rows";
    case OpKind::LayerNorm: return "layer_norm";
    case OpKind::Cosine: return "cosine";
    case OpKind::Sum: return "sum";
    case OpKind::ScaleByEntry: return "scale_by_entry";
  }
  return "unknown";
}

const Tensor& Var::value() const {
  if (tape_ == nullptr) throw ContractError("use of an unbound Var");
  return tape_->value(id_);
}

double Var::item() const {
  const Tensor& v = value();
  if (v.size() != 1) throw ContractError("item() on non-scalar " + to_string(v.shape()));
  return v[0];
}

Var Tape::constant(Tensor value) {
  value.zero_grad();
  nodes_.push_back(Node{OpKind::Leaf, std::move(value), {}, {}, {}, nullptr, false});
  return Var(this, nodes_.size() - 1);
}

Var Tape::leaf(const Tensor& tensor) {
  if (auto it = leaves_.find(&tensor); it != leaves_.end()) return Var(this, it->second);
  Tensor copy(tensor.rows(), tensor.cols(),
              std::vector<double>(tensor.data().begin(), tensor.data().end()));
  const bool trainable = tensor.requires_grad();
  // The bound pointer is only written through during backward(), and only for
  // trainable tensors; frozen inputs are never modified.
  Tensor* bound = trainable ? const_cast<Tensor*>(&tensor) : nullptr;
  nodes_.push_back(Node{OpKind::Leaf, std::move(copy), {}, {}, {}, bound, trainable});
  leaves_.emplace(&tensor, nodes_.size() - 1);
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(OpKind kind, Tensor value, std::vector<std::size_t> inputs, BackwardFn fn) {
  bool needs = false;
  for (std::size_t id : inputs) needs = needs || nodes_.at(id).needs_grad;
  nodes_.push_back(Node{kind, std::move(value), std::move(inputs), std::move(fn), {}, nullptr, needs});
  return Var(this, nodes_.size() - 1);
}

std::span<double> Tape::grad_buffer(std::size_t id) {
  Node& n = nodes_.at(id);
  if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
  return n.grad;
}

void Tape::accumulate(std::size_t id, std::span<const double> g) {
  if (!nodes_.at(id).needs_grad) return;
  std::span<double> dst = grad_buffer(id);
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
}

void Tape::backward(Var loss) {
  if (loss.tape_ != this) throw ContractError("backward: loss recorded on another tape");
  if (loss.value().size() != 1) {
    throw ContractError("backward: loss must be scalar, got " + to_string(loss.shape()));
  }
  if (consumed_) throw ContractError("backward: tape already replayed");
  consumed_ = true;
  if (!nodes_[loss.id_].needs_grad) return;

  grad_buffer(loss.id_)[0] = 1.0;
  for (std::size_t i = loss.id_ + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.needs_grad || n.grad.empty()) continue;
    ++visits_;
    if (n.bound != nullptr) {
      n.bound->accumulate_grad(n.grad);
      continue;
    }
    if (!n.backward) continue;
    if (fault_ && fault_->kind == n.kind) {
      std::vector<double> scaled = n.grad;
      for (double& g : scaled) g *= fault_->factor;
      n.backward(*this, scaled);
    } else {
      // Copy: the backward rule may grow other buffers but never this one.
      const std::vector<double> upstream = n.grad;
      n.backward(*this, upstream);
    }
  }
}

std::span<const double> Tape::grad(Var v) const {
  return nodes_.at(v.id_).grad;
}

namespace {

Tape& same_tape(Var a, Var b, std::string_view op) {
  if (&a.tape() != &b.tape()) throw ContractError(std::string(op) + ": operands on different tapes");
  return a.tape();
}

void require_same_shape(std::string_view op, Shape a, Shape b) {
  if (a != b) throw ShapeError(op, a, b);
}

// out[m x n] (+)= a[m x k] * b[k x n], with optional transposes on the inputs.
void gemm(std::span<const double> a, std::span<const double> b, std::span<double> out,
          std::size_t m, std::size_t k, std::size_t n, bool trans_a, bool trans_b) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = trans_a ? a[p * m + i] : a[i * k + p];
      if (av == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) {
        const double bv = trans_b ? b[j * k + p] : b[p * n + j];
        out[i * n + j] += av * bv;
      }
    }
  }
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b, "matmul");
  const Shape sa = a.shape();
  const Shape sb = b.shape();
  if (sa.cols != sb.rows) throw ShapeError("matmul", sa, sb);
  const std::size_t m = sa.rows, k = sa.cols, n = sb.cols;
  Tensor out(m, n);
  gemm(a.value().data(), b.value().data(), out.data(), m, k, n, false, false);
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(OpKind::MatMul, std::move(out), {ia, ib},
                  [ia, ib, m, k, n](Tape& tp, std::span<const double> g) {
                    if (tp.needs_grad(ia)) {
                      // dA = g * B^T
                      gemm(g, tp.value(ib).data(), tp.grad_buffer(ia), m, n, k, false, true);
                    }
                    if (tp.needs_grad(ib)) {
                      // dB = A^T * g
                      gemm(tp.value(ia).data(), g, tp.grad_buffer(ib), k, m, n, true, false);
                    }
                  });
}

Var add(Var a, Var b) {
  Tape& t = same_tape(a, b, "add");
  require_same_shape("add", a.shape(), b.shape());
  Tensor out = a.value();
  const auto bv = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(OpKind::Add, std::move(out), {ia, ib},
                  [ia, ib](Tape& tp, std::span<const double> g) {
                    tp.accumulate(ia, g);
                    tp.accumulate(ib, g);
                  });
}

Var add_row(Var x, Var row) {
  Tape& t = same_tape(x, row, "add_row");
  const Shape sx = x.shape();
  if (row.shape().rows != 1 || row.shape().cols != sx.cols) throw ShapeError("add_row", sx, row.shape());
  Tensor out = x.value();
  const auto rv = row.value().data();
  for (std::size_t r = 0; r < sx.rows; ++r)
    for (std::size_t c = 0; c < sx.cols; ++c) out(r, c) += rv[c];
  const std::size_t ix = x.id(), ir = row.id();
  return t.record(OpKind::AddRow, std::move(out), {ix, ir},
                  [ix, ir, sx](Tape& tp, std::span<const double> g) {
                    tp.accumulate(ix, g);
                    if (tp.needs_grad(ir)) {
                      auto dr = tp.grad_buffer(ir);
                      for (std::size_t r = 0; r < sx.rows; ++r)
                        for (std::size_t c = 0; c < sx.cols; ++c) dr[c] += g[r * sx.cols + c];
                    }
                  });
}

Var sub(Var a, Var b) {
  Tape& t = same_tape(a, b, "sub");
  require_same_shape("sub", a.shape(), b.shape());
  Tensor out = a.value();
  const auto bv = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(OpKind::Sub, std::move(out), {ia, ib},
                  [ia, ib](Tape& tp, std::span<const double> g) {
                    tp.accumulate(ia, g);
                    if (tp.needs_grad(ib)) {
                      auto db = tp.grad_buffer(ib);
                      for (std::size_t i = 0; i < db.size(); ++i) db[i] -= g[i];
                    }
                  });
}

Var hadamard(Var a, Var b) {
  Tape& t = same_tape(a, b, "hadamard");
  require_same_shape("hadamard", a.shape(), b.shape());
  Tensor out = a.value();
  const auto bv = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(OpKind::Hadamard, std::move(out), {ia, ib},
                  [ia, ib](Tape& tp, std::span<const double> g) {
                    if (tp.needs_grad(ia)) {
                      auto da = tp.grad_buffer(ia);
                      const auto bv = tp.value(ib).data();
                      for (std::size_t i = 0; i < da.size(); ++i) da[i] += g[i] * bv[i];
                    }
                    if (tp.needs_grad(ib)) {
                      auto db = tp.grad_buffer(ib);
                      const auto av = tp.value(ia).data();
                      for (std::size_t i = 0; i < db.size(); ++i) db[i] += g[i] * av[i];
                    }
                  });
}

Var affine(Var x, double scale, double shift) {
  Tensor out = x.value();
  for (double& v : out.data()) v = scale * v + shift;
  const std::size_t ix = x.id();
  return x.tape().record(OpKind::Affine, std::move(out), {ix},
                         [ix, scale](Tape& tp, std::span<const double> g) {
                           if (!tp.needs_grad(ix)) return;
                           auto dx = tp.grad_buffer(ix);
                           for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += scale * g[i];
                         });
}

Var tanh(Var x) {
  Tensor out = x.value();
  for (double& v : out.data()) v = std::tanh(v);
  const std::size_t ix = x.id();
  Tape& t = x.tape();
  const std::size_t self = t.size();
  return t.record(OpKind::Tanh, std::move(out), {ix},
                  [ix, self](Tape& tp, std::span<const double> g) {
                    if (!tp.needs_grad(ix)) return;
                    auto dx = tp.grad_buffer(ix);
                    const auto y = tp.value(self).data();
                    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += g[i] * (1.0 - y[i] * y[i]);
                  });
}

Var softmax_rows(Var x) {
  const Shape s = x.shape();
  Tensor out = x.value();
  for (std::size_t r = 0; r < s.rows; ++r) {
    double mx = out(r, 0);
    for (std::size_t c = 1; c < s.cols; ++c) mx = std::max(mx, out(r, c));
    double total = 0.0;
    for (std::size_t c = 0; c < s.cols; ++c) {
      out(r, c) = std::exp(out(r, c) - mx);
      total += out(r, c);
    }
    for (std::size_t c = 0; c < s.cols; ++c) out(r, c) /= total;
  }
  const std::size_t ix = x.id();
  Tape& t = x.tape();
  const std::size_t self = t.size();
  return t.record(OpKind::SoftmaxRows, std::move(out), {ix},
                  [ix, self, s](Tape& tp, std::span<const double> g) {
                    if (!tp.needs_grad(ix)) return;
                    auto dx = tp.grad_buffer(ix);
                    const auto y = tp.value(self).data();
                    for (std::size_t r = 0; r < s.rows; ++r) {
                      double inner = 0.0;
                      for (std::size_t c = 0; c < s.cols; ++c) inner += g[r * s.cols + c] * y[r * s.cols + c];
                      for (std::size_t c = 0; c < s.cols; ++c) {
                        const std::size_t i = r * s.cols + c;
                        dx[i] += y[i] * (g[i] - inner);
                      }
                    }
                  });
}

Var softmax_row(Var x) {
  if (x.shape().rows != 1) throw ShapeError("softmax_row expects a single row, got " + to_string(x.shape()));
  return softmax_rows(x);
}

Var transpose(Var x) {
  const Shape s = x.shape();
  Tensor out(s.cols, s.rows);
  const Tensor& in = x.value();
  for (std::size_t r = 0; r < s.rows; ++r)
    for (std::size_t c = 0; c < s.cols; ++c) out(c, r) = in(r, c);
  const std::size_t ix = x.id();
  return x.tape().record(OpKind::Transpose, std::move(out), {ix},
                         [ix, s](Tape& tp, std::span<const double> g) {
                           if (!tp.needs_grad(ix)) return;
                           auto dx = tp.grad_buffer(ix);
                           for (std::size_t r = 0; r < s.rows; ++r)
                             for (std::size_t c = 0; c < s.cols; ++c) dx[r * s.cols + c] += g[c * s.rows + r];
                         });
}

Var concat_rows(Var top, Var bottom) {
  Tape& t = same_tape(top, bottom, "concat_rows");
  const Shape st = top.shape(), sb = bottom.shape();
  if (st.cols != sb.cols) throw ShapeError("concat_rows", st, sb);
  std::vector<double> data(top.value().data().begin(), top.value().data().end());
  data.insert(data.end(), bottom.value().data().begin(), bottom.value().data().end());
  Tensor out(st.rows + sb.rows, st.cols, std::move(data));
  const std::size_t it = top.id(), ib = bottom.id();
  const std::size_t split = st.size();
  return t.record(OpKind::ConcatRows, std::move(out), {it, ib},
                  [it, ib, split](Tape& tp, std::span<const double> g) {
                    tp.accumulate(it, g.first(split));
                    tp.accumulate(ib, g.subspan(split));
                  });
}

Var slice_rows(Var x, std::size_t begin, std::size_t count) {
  const Shape s = x.shape();
  if (count == 0 || begin + count > s.rows) {
    throw ShapeError("slice_rows: rows [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                     ") out of range for " + to_string(s));
  }
  const auto src = x.value().data().subspan(begin * s.cols, count * s.cols);
  Tensor out(count, s.cols, std::vector<double>(src.begin(), src.end()));
  const std::size_t ix = x.id();
  const std::size_t offset = begin * s.cols;
  return x.tape().record(OpKind::SliceRows, std::move(out), {ix},
                         [ix, offset](Tape& tp, std::span<const double> g) {
                           if (!tp.needs_grad(ix)) return;
                           auto dx = tp.grad_buffer(ix);
                           for (std::size_t i = 0; i < g.size(); ++i) dx[offset + i] += g[i];
                         });
}

Var mean_rows(Var x) {
  const Shape s = x.shape();
  Tensor out(1, s.cols);
  const Tensor& in = x.value();
  for (std::size_t r = 0; r < s.rows; ++r)
    for (std::size_t c = 0; c < s.cols; ++c) out(0, c) += in(r, c);
  const double inv = 1.0 / static_cast<double>(s.rows);
  for (double& v : out.data()) v *= inv;
  const std::size_t ix = x.id();
  return x.tape().record(OpKind::MeanRows, std::move(out), {ix},
                         [ix, s, inv](Tape& tp, std::span<const double> g) {
                           if (!tp.needs_grad(ix)) return;
                           auto dx = tp.grad_buffer(ix);
                           for (std::size_t r = 0; r < s.rows; ++r)
                             for (std::size_t c = 0; c < s.cols; ++c) dx[r * s.cols + c] += g[c] * inv;
                         });
}

Var layer_norm(Var x, Var gain, Var bias) {
  Tape& t = same_tape(x, gain, "layer_norm");
  same_tape(x, bias, "layer_norm");
  const Shape s = x.shape();
  if (s.cols < 2) throw ShapeError("layer_norm requires at least 2 columns, got " + to_string(s));
  const Shape affine_shape{1, s.cols};
  require_same_shape("layer_norm gain", affine_shape, gain.shape());
  require_same_shape("layer_norm bias", affine_shape, bias.shape());

  const Tensor& in = x.value();
  const auto gv = gain.value().data();
  const auto bv = bias.value().data();
  Tensor normed(s.rows, s.cols);
  std::vector<double> inv_std(s.rows);
  Tensor out(s.rows, s.cols);
  const double d = static_cast<double>(s.cols);
  for (std::size_t r = 0; r < s.rows; ++r) {
    double mean = 0.0;
    for (std::size_t c = 0; c < s.cols; ++c) mean += in(r, c);
    mean /= d;
    double var = 0.0;
    for (std::size_t c = 0; c < s.cols; ++c) var += (in(r, c) - mean) * (in(r, c) - mean);
    var /= d;
    inv_std[r] = 1.0 / std::sqrt(var + kLayerNormEps);
    for (std::size_t c = 0; c < s.cols; ++c) {
      normed(r, c) = (in(r, c) - mean) * inv_std[r];
      out(r, c) = normed(r, c) * gv[c] + bv[c];
    }
  }
  const std::size_t ix = x.id(), ig = gain.id(), ib = bias.id();
  return t.record(
      OpKind::LayerNorm, std::move(out), {ix, ig, ib},
      [ix, ig, ib, s, d, normed = std::move(normed), inv_std = std::move(inv_std)](
          Tape& tp, std::span<const double> g) {
        const auto gv = tp.value(ig).data();
        if (tp.needs_grad(ig)) {
          auto dg = tp.grad_buffer(ig);
          for (std::size_t r = 0; r < s.rows; ++r)
            for (std::size_t c = 0; c < s.cols; ++c) dg[c] += g[r * s.cols + c] * normed(r, c);
        }
        if (tp.needs_grad(ib)) {
          auto db = tp.grad_buffer(ib);
          for (std::size_t r = 0; r < s.rows; ++r)
            for (std::size_t c = 0; c < s.cols; ++c) db[c] += g[r * s.cols + c];
        }
        if (tp.needs_grad(ix)) {
          auto dx = tp.grad_buffer(ix);
          for (std::size_t r = 0; r < s.rows; ++r) {
            double mean_dn = 0.0, mean_dn_n = 0.0;
            for (std::size_t c = 0; c < s.cols; ++c) {
              const double dn = g[r * s.cols + c] * gv[c];
              mean_dn += dn;
              mean_dn_n += dn * normed(r, c);
            }
            mean_dn /= d;
            mean_dn_n /= d;
            for (std::size_t c = 0; c < s.cols; ++c) {
              const double dn = g[r * s.cols + c] * gv[c];
              dx[r * s.cols + c] += inv_std[r] * (dn - mean_dn - normed(r, c) * mean_dn_n);
            }
          }
        }
      });
}

Var cosine_similarity(Var u, Var v) {
  Tape& t = same_tape(u, v, "cosine_similarity");
  require_same_shape("cosine_similarity", u.shape(), v.shape());
  const auto uv = u.value().data();
  const auto vv = v.value().data();
  const double nu = l2_norm(uv);
  const double nv = l2_norm(vv);
  if (nu <= 1e-12 || nv <= 1e-12) {
    throw DegenerateVectorError("cosine_similarity: zero-norm input (norms " + std::to_string(nu) + ", " +
                                std::to_string(nv) + ")");
  }
  const double c = dot(uv, vv) / (nu * nv);
  const std::size_t iu = u.id(), iv = v.id();
  return t.record(OpKind::Cosine, Tensor::scalar(c), {iu, iv},
                  [iu, iv, nu, nv, c](Tape& tp, std::span<const double> g) {
                    const auto uv = tp.value(iu).data();
                    const auto vv = tp.value(iv).data();
                    // dc/du = v / (|u||v|) - c u / |u|^2
                    if (tp.needs_grad(iu)) {
                      auto du = tp.grad_buffer(iu);
                      for (std::size_t i = 0; i < du.size(); ++i)
                        du[i] += g[0] * (vv[i] / (nu * nv) - c * uv[i] / (nu * nu));
                    }
                    if (tp.needs_grad(iv)) {
                      auto dv = tp.grad_buffer(iv);
                      for (std::size_t i = 0; i < dv.size(); ++i)
                        dv[i] += g[0] * (uv[i] / (nu * nv) - c * vv[i] / (nv * nv));
                    }
                  });
}

Var sum(Var x) {
  double total = 0.0;
  for (double v : x.value().data()) total += v;
  const std::size_t ix = x.id();
  return x.tape().record(OpKind::Sum, Tensor::scalar(total), {ix},
                         [ix](Tape& tp, std::span<const double> g) {
                           if (!tp.needs_grad(ix)) return;
                           for (double& d : tp.grad_buffer(ix)) d += g[0];
                         });
}

Var scale_by_entry(Var x, Var s, std::size_t index) {
  Tape& t = same_tape(x, s, "scale_by_entry");
  if (index >= s.value().size()) {
    throw ShapeError("scale_by_entry: index " + std::to_string(index) + " outside " + to_string(s.shape()));
  }
  const double w = s.value()[index];
  Tensor out = x.value();
  for (double& v : out.data()) v *= w;
  const std::size_t ix = x.id(), is = s.id();
  return t.record(OpKind::ScaleByEntry, std::move(out), {ix, is},
                  [ix, is, index](Tape& tp, std::span<const double> g) {
                    const double w = tp.value(is)[index];
                    if (tp.needs_grad(ix)) {
                      auto dx = tp.grad_buffer(ix);
                      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += g[i] * w;
                    }
                    if (tp.needs_grad(is)) {
                      const auto xv = tp.value(ix).data();
                      double acc = 0.0;
                      for (std::size_t i = 0; i < xv.size(); ++i) acc += g[i] * xv[i];
                      tp.grad_buffer(is)[index] += acc;
                    }
                  });
}

}  // namespace spider::numerics
