#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "droute/autodiff.hpp"

namespace droute::nn {

// Evaluates a scalar function of a list of tensors and writes its gradient
// (same shapes) into `grads`.
using ValueAndGradFn = std::function<double(const std::vector<Tensor>& params, std::vector<Tensor>& grads)>;
// Builds the scalar on a tape from one Var per parameter tensor.
using TapeFn = std::function<Var(Tape& tape, std::span<const Var> params)>;

ValueAndGradFn tape_value_and_grad(TapeFn fn);

struct GradCheckOptions {
  std::size_t samples = 200;  // coordinates checked (all of them when fewer exist)
  double step = 1e-5;         // central-difference half step
  double floor = 1e-8;        // denominator floor in |a - f| / (|a| + floor)
  std::uint64_t seed = 0;
};

struct GradCheckReport {
  std::size_t checked = 0;
  double max_rel_error = 0.0;
  std::size_t worst_tensor = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  bool passed = false;
};

// Compares the analytic gradient of `fn` against central finite differences
// on a random subsample of coordinates.
GradCheckReport check_gradients(const ValueAndGradFn& fn, std::vector<Tensor> params, double tol,
                                const GradCheckOptions& options = {});

}  // namespace droute::nn
