#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

#include "droute/tensor.hpp"

namespace droute::nn {

class Tape;

// Handle to a node on a Tape. Cheap to copy; valid while its tape lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Tensor& grad() const;
  const Shape& shape() const { return value().shape(); }
  Tape* tape() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Records primitive operations in evaluation order for reverse-mode
// differentiation. Single writer; one tape per rollout.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  // Leaf whose gradient is kept after backward().
  Var variable(Tensor value);

  // Seeds d(loss)/d(loss) = 1 and propagates to every node. Throws
  // ContractError when `loss` is not a one-element tensor.
  void backward(Var loss);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  // Gradient after backward(); a zero tensor for nodes the loss does not
  // depend on.
  const Tensor& grad(std::size_t id) const;
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }
  void clear() noexcept { nodes_.clear(); }

  // For primitive implementations: appends a node whose gradient flows to
  // `inputs` through `fn` when any input requires it.
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn);
  Var record(Tensor value, std::span<const Var> inputs, BackwardFn fn);
  // Gradient accumulator for node `id`, allocated as zeros on first use.
  Tensor& grad_buffer(std::size_t id);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
  Tensor empty_grad_;
};

// Boolean mask for softmax: 1 = allowed, 0 = forbidden. Same element count as
// the logits it masks.
using Mask = std::vector<std::uint8_t>;

inline constexpr double kMaskPenalty = -1e9;

// All primitives throw ShapeError on incompatible operands.
Var matmul(Var a, Var b);                  // [m,k] x [k,n] -> [m,n]
Var transpose(Var a);                      // [m,n] -> [n,m]
Var add(Var a, Var b);                     // same shape
Var sub(Var a, Var b);
Var mul(Var a, Var b);                     // elementwise
Var scale(Var a, double s);
Var add_bias(Var a, Var bias);             // [m,n] + [n]
Var broadcast_rows(Var v, std::size_t m);  // [n] -> [m,n]
Var tanh(Var a);
Var relu(Var a);
Var exp(Var a);
Var log(Var a);
// Softmax along `axis` of a rank-1 or rank-2 tensor. Forbidden entries get
// probability exactly 0; a slice with no allowed entry raises
// DegenerateInputError.
Var softmax(Var a, std::size_t axis, const Mask* mask = nullptr);
Var log_softmax(Var a, std::size_t axis, const Mask* mask = nullptr);
Var gather_rows(Var a, std::span<const std::size_t> rows);  // [m,n] -> [k,n]
Var pick(Var a, std::span<const std::size_t> cols);         // [m,n] -> [m], a[i, cols[i]]
Var sum(Var a);                                             // -> scalar
Var mean(Var a);                                            // -> scalar
Var mean_rows(Var a);                                       // [m,n] -> [n]
Var concat_cols(std::span<const Var> parts);                // [m,*] -> [m, sum]
Var slice_cols(Var a, std::size_t start, std::size_t len);
Var reshape(Var a, Shape shape);
// Valid-padding 1-D convolution.
//   x: [B, L, Cin] (or [L, Cin]), w: [Cout, ks, Cin], bias: [Cout]
//   -> [B, L - ks + 1, Cout] (or [L - ks + 1, Cout])
Var conv1d(Var x, Var w, Var bias);
// sum_i weights[i] * a[i] for a constant weight vector.
Var weighted_sum(Var a, std::span<const double> weights);

}  // namespace droute::nn
