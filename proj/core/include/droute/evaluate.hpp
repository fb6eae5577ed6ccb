#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "droute/instance.hpp"
#include "droute/policy.hpp"
#include "droute/solvers.hpp"
#include "droute/tsplib.hpp"

namespace droute {

// Anything that proposes tours. The harness keeps the shortest candidate,
// measured on the instance it was given. Group labels never reach solve().
class RoutePolicy {
 public:
  virtual ~RoutePolicy() = default;
  virtual std::vector<Tour> solve(const AnyInstance& inst) const = 0;
};

// Greedy multi-start decoding, optionally over the eight square symmetries.
class NeuralPolicy final : public RoutePolicy {
 public:
  explicit NeuralPolicy(PolicyParams params, std::size_t starts = 0, bool augment = true);
  std::vector<Tour> solve(const AnyInstance& inst) const override;

 private:
  PolicyParams params_;
  std::size_t starts_;  // 0 = default_starts(n)
  bool augment_;
};

// The solvers-module reference: two_opt(nearest_neighbor), Held-Karp for small
// TSPs, savings for CVRP.
class ReferencePolicy final : public RoutePolicy {
 public:
  std::vector<Tour> solve(const AnyInstance& inst) const override;
};

struct EvalOptions {
  std::size_t threads = 1;
  bool with_reference = true;  // false omits every gap
};

struct InstanceResult {
  std::size_t group = 0;  // index into Metrics::groups
  std::size_t index = 0;  // position within the group
  Tour tour;
  double objective = 0.0;
  std::optional<double> reference;
  std::optional<double> gap;  // objective / reference - 1
  double seconds = 0.0;
};

struct GroupMetrics {
  std::string label;
  bool atypical = false;  // anything but the uniform distribution
  std::size_t count = 0;
  double mean_obj = 0.0;
  std::optional<double> mean_gap;
  double time_s = 0.0;
};

struct Metrics {
  std::vector<GroupMetrics> groups;
  double mean_obj = 0.0;  // instance-weighted over all groups
  std::optional<double> mean_gap;
  std::optional<double> worst_group_gap;
  std::optional<double> obj_star;  // instance-weighted over atypical groups
  std::optional<double> gap_star;
  double time_s = 0.0;
  // What the gaps are measured against: "exact", "heuristic", "best-known",
  // "mixed" or "none".
  std::string reference;
  std::vector<InstanceResult> results;
};

Metrics evaluate(const RoutePolicy& policy, const GroupedDataset& dataset, const EvalOptions& options = {});

// One group per benchmark instance. Objectives are integer TSPLIB lengths on
// the raw coordinates. Gaps use bench.best_known when set, otherwise the
// reference solver's tour scored the same way.
Metrics evaluate_benchmarks(const RoutePolicy& policy, std::span<const BenchmarkInstance> benches,
                            const EvalOptions& options = {});

}  // namespace droute
