#include "droute/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "droute/error.hpp"

namespace droute::nn {

const Tensor& Var::value() const { return tape_->value(id_); }
const Tensor& Var::grad() const { return tape_->grad(id_); }

Var Tape::constant(Tensor value) {
  nodes_.push_back({std::move(value), {}, false, {}});
  return {this, nodes_.size() - 1};
}

Var Tape::variable(Tensor value) {
  nodes_.push_back({std::move(value), {}, true, {}});
  return {this, nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn) {
  return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(fn));
}

Var Tape::record(Tensor value, std::span<const Var> inputs, BackwardFn fn) {
  bool needs = false;
  for (const auto& in : inputs) {
    if (in.tape() != this) throw ContractError("operands live on different tapes");
    needs = needs || nodes_[in.id()].requires_grad;
  }
  nodes_.push_back({std::move(value), {}, needs, needs ? std::move(fn) : BackwardFn{}});
  return {this, nodes_.size() - 1};
}

Tensor& Tape::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty() && !n.value.empty()) n.grad = Tensor(n.value.shape(), 0.0);
  return n.grad;
}

const Tensor& Tape::grad(std::size_t id) const {
  const Node& n = nodes_[id];
  if (n.grad.empty()) {
    auto& self = const_cast<Tape&>(*this);
    self.empty_grad_ = Tensor(n.value.shape(), 0.0);
    return self.empty_grad_;
  }
  return n.grad;
}

void Tape::backward(Var loss) {
  if (loss.tape() != this) throw ContractError("loss belongs to another tape");
  if (nodes_[loss.id()].value.size() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " +
                        shape_string(nodes_[loss.id()].value.shape()));
  }
  for (auto& n : nodes_) n.grad = Tensor();
  grad_buffer(loss.id())[0] = 1.0;
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (n.requires_grad && n.backward && !n.grad.empty()) n.backward(*this, id);
  }
}

namespace {

Tape& tape_of(Var a) {
  if (!a.valid()) throw ContractError("operation on an empty Var");
  return *a.tape();
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_string(t.shape()));
  }
}

// Decomposes a rank-1/rank-2 tensor around `axis` into outer x len x inner.
struct AxisView {
  std::size_t outer, len, inner;
};

AxisView axis_view(const Tensor& t, std::size_t axis, const char* op) {
  if (t.rank() == 0 || t.rank() > 2 || axis >= t.rank()) {
    throw ShapeError(std::string(op) + ": unsupported axis " + std::to_string(axis) + " for shape " +
                     shape_string(t.shape()));
  }
  if (t.rank() == 1) return {1, t.dim(0), 1};
  return axis == 0 ? AxisView{1, t.dim(0), t.dim(1)} : AxisView{t.dim(0), t.dim(1), 1};
}

template <class F>
Var unary(Var a, F f, Tape::BackwardFn back) {
  Tape& t = tape_of(a);
  Tensor out = a.value();
  for (auto& v : out.storage()) v = f(v);
  return t.record(std::move(out), {a}, std::move(back));
}

// Shared forward for softmax / log_softmax. Fills `prob` always; `logp` when
// requested. Forbidden entries: prob 0, logp = x + penalty - lse.
void softmax_forward(const Tensor& x, std::size_t axis, const Mask* mask, Tensor& prob, Tensor* logp,
                     const char* op) {
  const AxisView v = axis_view(x, axis, op);
  if (mask != nullptr && mask->size() != x.size()) throw ShapeError(std::string(op) + ": mask size mismatch");
  prob = Tensor(x.shape(), 0.0);
  if (logp) *logp = Tensor(x.shape(), 0.0);
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t in = 0; in < v.inner; ++in) {
      const std::size_t base = o * v.len * v.inner + in;
      auto idx = [&](std::size_t k) { return base + k * v.inner; };
      auto allowed = [&](std::size_t k) { return mask == nullptr || (*mask)[idx(k)] != 0; };
      double hi = -std::numeric_limits<double>::infinity();
      bool any = false;
      for (std::size_t k = 0; k < v.len; ++k) {
        if (!allowed(k)) continue;
        any = true;
        // NaN must propagate so callers see a non-finite result.
        if (std::isnan(x[idx(k)]) || x[idx(k)] > hi) hi = std::isnan(hi) ? hi : x[idx(k)];
      }
      if (!any) {
        throw DegenerateInputError(std::string(op) + ": every entry of a slice is masked");
      }
      double z = 0.0;
      for (std::size_t k = 0; k < v.len; ++k) {
        if (allowed(k)) {
          const double e = std::exp(x[idx(k)] - hi);
          prob[idx(k)] = e;
          z += e;
        }
      }
      const double log_z = hi + std::log(z);
      for (std::size_t k = 0; k < v.len; ++k) {
        if (allowed(k)) {
          prob[idx(k)] /= z;
          if (logp) (*logp)[idx(k)] = x[idx(k)] - log_z;
        } else if (logp) {
          (*logp)[idx(k)] = x[idx(k)] + kMaskPenalty - log_z;
        }
      }
    }
  }
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  require_rank(A, 2, "matmul");
  require_rank(B, 2, "matmul");
  const std::size_t m = A.dim(0), k = A.dim(1), n = B.dim(1);
  if (B.dim(0) != k) {
    throw ShapeError("matmul: " + shape_string(A.shape()) + " x " + shape_string(B.shape()));
  }
  Tensor C({m, n}, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = &C[i * n];
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = A[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = &B[p * n];
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(std::move(C), {a, b}, [ia, ib, m, k, n](Tape& tp, std::size_t self) {
    const Tensor& G = tp.grad_buffer(self);
    const Tensor& A = tp.value(ia);
    const Tensor& B = tp.value(ib);
    if (tp.requires_grad(ia)) {
      Tensor& GA = tp.grad_buffer(ia);
      for (std::size_t i = 0; i < m; ++i) {
        const double* grow = &G[i * n];
        for (std::size_t p = 0; p < k; ++p) {
          const double* brow = &B[p * n];
          double s = 0.0;
          for (std::size_t j = 0; j < n; ++j) s += grow[j] * brow[j];
          GA[i * k + p] += s;
        }
      }
    }
    if (tp.requires_grad(ib)) {
      Tensor& GB = tp.grad_buffer(ib);
      for (std::size_t i = 0; i < m; ++i) {
        const double* grow = &G[i * n];
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = A[i * k + p];
          if (aip == 0.0) continue;
          double* gbrow = &GB[p * n];
          for (std::size_t j = 0; j < n; ++j) gbrow[j] += aip * grow[j];
        }
      }
    }
  });
}

Var transpose(Var a) {
  Tape& t = tape_of(a);
  const Tensor& A = a.value();
  require_rank(A, 2, "transpose");
  const std::size_t m = A.dim(0), n = A.dim(1);
  Tensor out({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = A[i * n + j];
  const std::size_t ia = a.id();
  return t.record(std::move(out), {a}, [ia, m, n](Tape& tp, std::size_t self) {
    const Tensor& G = tp.grad_buffer(self);
    Tensor& GA = tp.grad_buffer(ia);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) GA[i * n + j] += G[j * m + i];
  });
}

namespace {

template <class Fwd>
Var binary_same_shape(Var a, Var b, const char* op, Fwd fwd, double sign_b, bool product) {
  Tape& t = tape_of(a);
  require_same_shape(a.value(), b.value(), op);
  Tensor out = a.value();
  const Tensor& B = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(out[i], B[i]);
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(std::move(out), {a, b}, [ia, ib, sign_b, product](Tape& tp, std::size_t self) {
    const Tensor& G = tp.grad_buffer(self);
    if (tp.requires_grad(ia)) {
      Tensor& GA = tp.grad_buffer(ia);
      if (product) {
        const Tensor& B = tp.value(ib);
        for (std::size_t i = 0; i < G.size(); ++i) GA[i] += G[i] * B[i];
      } else {
        for (std::size_t i = 0; i < G.size(); ++i) GA[i] += G[i];
      }
    }
    if (tp.requires_grad(ib)) {
      Tensor& GB = tp.grad_buffer(ib);
      if (product) {
        const Tensor& A = tp.value(ia);
        for (std::size_t i = 0; i < G.size(); ++i) GB[i] += G[i] * A[i];
      } else {
        for (std::size_t i = 0; i < G.size(); ++i) GB[i] += sign_b * G[i];
      }
    }
  });
}

}  // namespace

Var add(Var a, Var b) {
  return binary_same_shape(a, b, "add", [](double x, double y) { return x + y; }, 1.0, false);
}

Var sub(Var a, Var b) {
  return binary_same_shape(a, b, "sub", [](double x, double y) { return x - y; }, -1.0, false);
}

Var mul(Var a, Var b) {
  return binary_same_shape(a, b, "mul", [](double x, double y) { return x * y; }, 1.0, true);
}

Var scale(Var a, double s) {
  const std::size_t ia = a.id();
  return unary(a, [s](double v) { return v * s; }, [ia, s](Tape& tp, std::size_t self) {
    const Tensor& G = tp.grad_buffer(self);
    Tensor& GA = tp.grad_buffer(ia);
    for (std::size_t i = 0; i < G.size(); ++i) GA[i] += s * G[i];
  });
}

Var add_bias(Var a, Var bias) {
  Tape& t = tape_of(a);
  const Tensor& A = a.value();
  const Tensor& b = bias.value();
  require_rank(A, 2, "add_bias");
  require_rank(b, 1, "add_bias");
  const std::size_t m = A.dim(0), n = A.dim(1);
  if (b.dim(0) != n) throw ShapeError("add_bias: bias length does not match columns");
  Tensor out = A;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += b[j];
  const std::size_t ia = a.id(), ib = bias.id();
  return t.record(std::move(out), {a, bias}, [ia, ib, m, n](Tape& tp, std::size_t self) {
    const Tensor& G = tp.grad_buffer(self);
    if (tp.requires_grad(ia)) tp.grad_buffer(ia) += G;
    if (tp.requires_grad(ib)) {
      Tensor& GB = tp.grad_buffer(ib);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) GB[j] += G[i * n + j];
    }
  });
}

Var broadcast_rows(Var v, std::size_t m) {
  Tape& t = tape_of(v);
  const Tensor& V = v.value();
  require_rank(V, 1, "broadcast_rows");
  const std::size_t n = V.dim(0);
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = V[j];
  const std::size_t iv = v.id();
  return t.record(std::move(out), {v}, [iv, m, n](Tape& tp, std::size_t self) {
    const Tensor& G = tp.grad_buffer(self);
    Tensor& GV = tp.grad_buffer(iv);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) GV[j] += G[i * n + j];
  });
}

Var tanh(Var a) {
  const std::size_t ia = a.id();
  return unary(a, [](double v) { return std::tanh(v); }, [ia](Tape& tp, std::size_t self) {
    const Tensor& G = tp.grad_buffer(self);
    const Tensor& Y = tp.value(self);
    Tensor& GA = tp.grad_buffer(ia);
    for (std::size_t i = 0; i < G.size(); ++i) GA[i] += G[i] * (1.0 - Y[i] * Y[i]);
  });
}

Var relu(Var a) {
  const std::size_t ia = a.id();
  return unary(a, [](double v) { return v > 0.0 ? v : 0.0; }, [ia](Tape& tp, std::size_t self) {
    const Tensor& G = tp.grad_buffer(self);
    const Tensor& X = tp.value(ia);
    Tensor& GA = tp.grad_buffer(ia);
    for (std::size_t i = 0; i < G.size(); ++i) GA[i] += X[i] > 0.0 ? G[i] : 0.0;
  });
}

Var exp(Var a) {
  const std::size_t ia = a.id();
  return unary(a, [](double v) { return std::exp(v); }, [ia](Tape& tp, std::size_t self) {
    const Tensor& G = tp.grad_buffer(self);
    const Tensor& Y = tp.value(self);
    Tensor& GA = tp.grad_buffer(ia);
    for (std::size_t i = 0; i < G.size(); ++i) GA[i] += G[i] * Y[i];
  });
}

Var log(Var a) {
  const std::size_t ia = a.id();
  return unary(a, [](double v) { return std::log(v); }, [ia](Tape& tp, std::size_t self) {
    const Tensor& G = tp.grad_buffer(self);
    const Tensor& X = tp.value(ia);
    Tensor& GA = tp.grad_buffer(ia);
    for (std::size_t i = 0; i < G.size(); ++i) GA[i] += G[i] / X[i];
  });
}

Var softmax(Var a, std::size_t axis, const Mask* mask) {
  Tape& t = tape_of(a);
  Tensor prob;
  softmax_forward(a.value(), axis, mask, prob, nullptr, "softmax");
  const AxisView v = axis_view(a.value(), axis, "softmax");
  const std::size_t ia = a.id();
  return t.record(std::move(prob), {a}, [ia, v](Tape& tp, std::size_t self) {
    const Tensor& G = tp.grad_buffer(self);
    const Tensor& P = tp.value(self);
    Tensor& GA = tp.grad_buffer(ia);
    for (std::size_t o = 0; o < v.outer; ++o) {
      for (std::size_t in = 0; in < v.inner; ++in) {
        const std::size_t base = o * v.len * v.inner + in;
        double dot = 0.0;
        for (std::size_t k = 0; k < v.len; ++k) dot += G[base + k * v.inner] * P[base + k * v.inner];
        for (std::size_t k = 0; k < v.len; ++k) {
          const std::size_t i = base + k * v.inner;
          GA[i] += P[i] * (G[i] - dot);
        }
      }
    }
  });
}

Var log_softmax(Var a, std::size_t axis, const Mask* mask) {
  Tape& t = tape_of(a);
  Tensor prob, logp;
  softmax_forward(a.value(), axis, mask, prob, &logp, "log_softmax");
  const AxisView v = axis_view(a.value(), axis, "log_softmax");
  const std::size_t ia = a.id();
  return t.record(std::move(logp), {a}, [ia, v, prob = std::move(prob)](Tape& tp, std::size_t self) {
    const Tensor& G = tp.grad_buffer(self);
    Tensor& GA = tp.grad_buffer(ia);
    for (std::size_t o = 0; o < v.outer; ++o) {
      for (std::size_t in = 0; in < v.inner; ++in) {
        const std::size_t base = o * v.len * v.inner + in;
        // Forbidden entries have prob 0; their own output still moves 1:1
        // with their input, and they do not enter log Z.
        double total = 0.0;
        for (std::size_t k = 0; k < v.len; ++k) total += G[base + k * v.inner];
        for (std::size_t k = 0; k < v.len; ++k) {
          const std::size_t i = base + k * v.inner;
          GA[i] += G[i] - prob[i] * total;
        }
      }
    }
  });
}

Var gather_rows(Var a, std::span<const std::size_t> rows) {
  Tape& t = tape_of(a);
  const Tensor& A = a.value();
  require_rank(A, 2, "gather_rows");
  const std::size_t m = A.dim(0), n = A.dim(1);
  Tensor out({rows.size(), n});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= m) throw ShapeError("gather_rows: row index out of range");
    std::copy_n(&A[rows[r] * n], n, &out[r * n]);
  }
  const std::size_t ia = a.id();
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return t.record(std::move(out), {a}, [ia, n, idx = std::move(idx)](Tape& tp, std::size_t self) {
    const Tensor& G = tp.grad_buffer(self);
    Tensor& GA = tp.grad_buffer(ia);
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (std::size_t j = 0; j < n; ++j) GA[idx[r] * n + j] += G[r * n + j];
  });
}

Var pick(Var a, std::span<const std::size_t> cols) {
  Tape& t = tape_of(a);
  const Tensor& A = a.value();
  require_rank(A, 2, "pick");
  const std::size_t m = A.dim(0), n = A.dim(1);
  if (cols.size() != m) throw ShapeError("pick: need one column index per row");
  Tensor out({m});
  for (std::size_t i = 0; i < m; ++i) {
    if (cols[i] >= n) throw ShapeError("pick: column index out of range");
    out[i] = A[i * n + cols[i]];
  }
  const std::size_t ia = a.id();
  std::vector<std::size_t> idx(cols.begin(), cols.end());
  return t.record(std::move(out), {a}, [ia, n, idx = std::move(idx)](Tape& tp, std::size_t self) {
    const Tensor& G = tp.grad_buffer(self);
    Tensor& GA = tp.grad_buffer(ia);
    for (std::size_t i = 0; i < idx.size(); ++i) GA[i * n + idx[i]] += G[i];
  });
}

Var sum(Var a) {
  Tape& t = tape_of(a);
  const Tensor& A = a.value();
  const double s = std::accumulate(A.data().begin(), A.data().end(), 0.0);
  const std::size_t ia = a.id();
  return t.record(Tensor::scalar(s), {a}, [ia](Tape& tp, std::size_t self) {
    const double g = tp.grad_buffer(self)[0];
    Tensor& GA = tp.grad_buffer(ia);
    for (auto& v : GA.storage()) v += g;
  });
}

Var mean(Var a) {
  const std::size_t n = a.value().size();
  if (n == 0) throw ShapeError("mean of an empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var mean_rows(Var a) {
  Tape& t = tape_of(a);
  const Tensor& A = a.value();
  require_rank(A, 2, "mean_rows");
  const std::size_t m = A.dim(0), n = A.dim(1);
  if (m == 0) throw ShapeError("mean_rows of zero rows");
  Tensor out({n}, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j] += A[i * n + j];
  const double inv = 1.0 / static_cast<double>(m);
  out *= inv;
  const std::size_t ia = a.id();
  return t.record(std::move(out), {a}, [ia, m, n, inv](Tape& tp, std::size_t self) {
    const Tensor& G = tp.grad_buffer(self);
    Tensor& GA = tp.grad_buffer(ia);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) GA[i * n + j] += G[j] * inv;
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no operands");
  Tape& t = tape_of(parts[0]);
  const std::size_t m = parts[0].value().dim(0);
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    require_rank(p.value(), 2, "concat_cols");
    if (p.value().dim(0) != m) throw ShapeError("concat_cols: row count mismatch");
    widths.push_back(p.value().dim(1));
    total += widths.back();
  }
  Tensor out({m, total});
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& P = parts[k].value();
    for (std::size_t i = 0; i < m; ++i) std::copy_n(&P[i * widths[k]], widths[k], &out[i * total + offset]);
    offset += widths[k];
  }
  std::vector<std::size_t> ids;
  for (const auto& p : parts) ids.push_back(p.id());
  return t.record(std::move(out), parts, [ids, widths, m, total](Tape& tp, std::size_t self) {
    const Tensor& G = tp.grad_buffer(self);
    std::size_t offset = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (tp.requires_grad(ids[k])) {
        Tensor& GP = tp.grad_buffer(ids[k]);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < widths[k]; ++j) GP[i * widths[k] + j] += G[i * total + offset + j];
      }
      offset += widths[k];
    }
  });
}

Var slice_cols(Var a, std::size_t start, std::size_t len) {
  Tape& t = tape_of(a);
  const Tensor& A = a.value();
  require_rank(A, 2, "slice_cols");
  const std::size_t m = A.dim(0), n = A.dim(1);
  if (start + len > n) throw ShapeError("slice_cols: range exceeds columns");
  Tensor out({m, len});
  for (std::size_t i = 0; i < m; ++i) std::copy_n(&A[i * n + start], len, &out[i * len]);
  const std::size_t ia = a.id();
  return t.record(std::move(out), {a}, [ia, m, n, start, len](Tape& tp, std::size_t self) {
    const Tensor& G = tp.grad_buffer(self);
    Tensor& GA = tp.grad_buffer(ia);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < len; ++j) GA[i * n + start + j] += G[i * len + j];
  });
}

Var reshape(Var a, Shape shape) {
  Tape& t = tape_of(a);
  Tensor out = a.value();
  out.reshape(std::move(shape));
  const std::size_t ia = a.id();
  return t.record(std::move(out), {a}, [ia](Tape& tp, std::size_t self) {
    const Tensor& G = tp.grad_buffer(self);
    Tensor& GA = tp.grad_buffer(ia);
    for (std::size_t i = 0; i < G.size(); ++i) GA[i] += G[i];
  });
}

Var conv1d(Var x, Var w, Var bias) {
  Tape& t = tape_of(x);
  const Tensor& X = x.value();
  const Tensor& W = w.value();
  const Tensor& B = bias.value();
  const bool batched = X.rank() == 3;
  if (!batched && X.rank() != 2) throw ShapeError("conv1d: input must be [B,L,Cin] or [L,Cin]");
  require_rank(W, 3, "conv1d");
  require_rank(B, 1, "conv1d");
  const std::size_t batch = batched ? X.dim(0) : 1;
  const std::size_t len = X.dim(batched ? 1 : 0);
  const std::size_t cin = X.dim(batched ? 2 : 1);
  const std::size_t cout = W.dim(0), ks = W.dim(1);
  if (W.dim(2) != cin) throw ShapeError("conv1d: kernel channel count does not match input");
  if (B.dim(0) != cout) throw ShapeError("conv1d: bias length does not match output channels");
  if (ks == 0 || ks > len) throw ShapeError("conv1d: kernel longer than the signal");
  const std::size_t positions = len - ks + 1;
  const std::size_t span = ks * cin;  // one window is contiguous in memory

  Tensor Y(batched ? Shape{batch, positions, cout} : Shape{positions, cout});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t p = 0; p < positions; ++p) {
      const double* win = &X[(b * len + p) * cin];
      double* y = &Y[(b * positions + p) * cout];
      for (std::size_t o = 0; o < cout; ++o) {
        const double* k = &W[o * span];
        double s = B[o];
        for (std::size_t q = 0; q < span; ++q) s += k[q] * win[q];
        y[o] = s;
      }
    }
  }
  const std::size_t ix = x.id(), iw = w.id(), ib = bias.id();
  return t.record(std::move(Y), {x, w, bias},
                  [=](Tape& tp, std::size_t self) {
                    const Tensor& G = tp.grad_buffer(self);
                    const Tensor& X = tp.value(ix);
                    const Tensor& W = tp.value(iw);
                    const bool gx = tp.requires_grad(ix), gw = tp.requires_grad(iw),
                               gb = tp.requires_grad(ib);
                    Tensor* GX = gx ? &tp.grad_buffer(ix) : nullptr;
                    Tensor* GW = gw ? &tp.grad_buffer(iw) : nullptr;
                    Tensor* GB = gb ? &tp.grad_buffer(ib) : nullptr;
                    for (std::size_t b = 0; b < batch; ++b) {
                      for (std::size_t p = 0; p < positions; ++p) {
                        const std::size_t xoff = (b * len + p) * cin;
                        const double* g = &G[(b * positions + p) * cout];
                        for (std::size_t o = 0; o < cout; ++o) {
                          const double go = g[o];
                          if (go == 0.0) continue;
                          if (GB) (*GB)[o] += go;
                          if (GW) {
                            double* gk = &(*GW)[o * span];
                            for (std::size_t q = 0; q < span; ++q) gk[q] += go * X[xoff + q];
                          }
                          if (GX) {
                            const double* k = &W[o * span];
                            for (std::size_t q = 0; q < span; ++q) (*GX)[xoff + q] += go * k[q];
                          }
                        }
                      }
                    }
                  });
}

Var weighted_sum(Var a, std::span<const double> weights) {
  Tape& t = tape_of(a);
  const Tensor& A = a.value();
  if (weights.size() != A.size()) throw ShapeError("weighted_sum: weight count mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < A.size(); ++i) s += weights[i] * A[i];
  const std::size_t ia = a.id();
  std::vector<double> w(weights.begin(), weights.end());
  return t.record(Tensor::scalar(s), {a}, [ia, w = std::move(w)](Tape& tp, std::size_t self) {
    const double g = tp.grad_buffer(self)[0];
    Tensor& GA = tp.grad_buffer(ia);
    for (std::size_t i = 0; i < w.size(); ++i) GA[i] += g * w[i];
  });
}

}  // namespace droute::nn
