#include "droute/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "droute/rng.hpp"

namespace droute::nn {

ValueAndGradFn tape_value_and_grad(TapeFn fn) {
  return [fn = std::move(fn)](const std::vector<Tensor>& params, std::vector<Tensor>& grads) {
    Tape tape;
    std::vector<Var> vars;
    vars.reserve(params.size());
    for (const auto& p : params) vars.push_back(tape.variable(p));
    const Var out = fn(tape, vars);
    tape.backward(out);
    grads.clear();
    for (const auto& v : vars) grads.push_back(v.grad());
    return out.value().item();
  };
}

GradCheckReport check_gradients(const ValueAndGradFn& fn, std::vector<Tensor> params, double tol,
                                const GradCheckOptions& options) {
  std::vector<Tensor> analytic;
  fn(params, analytic);

  // (tensor, index) for every coordinate, then a seeded partial shuffle.
  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t t = 0; t < params.size(); ++t)
    for (std::size_t i = 0; i < params[t].size(); ++i) coords.emplace_back(t, i);
  const std::size_t count = std::min(options.samples, coords.size());
  Rng rng(options.seed);
  for (std::size_t i = 0; i < count; ++i) {
    const auto j = static_cast<std::size_t>(
        rng.uniform_int(static_cast<std::int64_t>(i), static_cast<std::int64_t>(coords.size() - 1)));
    std::swap(coords[i], coords[j]);
  }

  GradCheckReport report;
  std::vector<Tensor> scratch;
  for (std::size_t c = 0; c < count; ++c) {
    const auto [t, i] = coords[c];
    const double saved = params[t][i];
    params[t][i] = saved + options.step;
    const double up = fn(params, scratch);
    params[t][i] = saved - options.step;
    const double down = fn(params, scratch);
    params[t][i] = saved;
    const double numeric = (up - down) / (2.0 * options.step);
    const double a = analytic[t][i];
    const double rel = std::abs(a - numeric) / (std::abs(a) + options.floor);
    if (rel > report.max_rel_error || c == 0) {
      report.max_rel_error = std::max(report.max_rel_error, rel);
      if (rel >= report.max_rel_error) {
        report.worst_tensor = t;
        report.worst_index = i;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  report.checked = count;
  report.passed = report.max_rel_error <= tol;
  return report;
}

}  // namespace droute::nn
