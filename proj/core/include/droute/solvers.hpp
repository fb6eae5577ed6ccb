#pragma once

#include <cstddef>
#include <vector>

#include "droute/instance.hpp"
#include "droute/policy.hpp"

namespace droute {

// Euclidean length including the closing edge (TSP) or every return to the
// depot (CVRP). Throws ContractError for an infeasible tour.
double tour_length(const Instance& inst, const Tour& tour);
double tour_length(const CvrpInstance& inst, const Tour& tour);
double tour_length(const AnyInstance& inst, const Tour& tour);

inline constexpr std::size_t kHeldKarpMaxNodes = 13;

// Exact bitmask dynamic program. Among optimal tours returns the
// lexicographically smallest one that starts at node 0 (hence second < last).
// Throws SizeError for n > 13 and ParameterError for n < 2.
Tour held_karp(const Instance& inst);

// Greedy nearest neighbour from `start`; ties go to the lower index.
Tour nearest_neighbor(const Instance& inst, int start = 0);

// First-improvement 2-exchange in a fixed scan order until no move improves.
Tour two_opt(const Instance& inst, Tour tour);

// Clarke-Wright savings followed by per-route 2-opt. Deterministic, and
// independent of customer order up to coordinate ties.
Tour cvrp_reference(const CvrpInstance& inst);

enum class ReferenceKind { exact, heuristic };

struct Reference {
  Tour tour;
  double length = 0.0;
  ReferenceKind kind = ReferenceKind::heuristic;
};

// Held-Karp for TSP with n <= 13; two_opt(nearest_neighbor) above that;
// cvrp_reference for CVRP.
Reference reference_solution(const AnyInstance& inst);

struct GapEntry {
  double model_length = 0.0;
  double reference_length = 0.0;
  double gap = 0.0;  // model / reference - 1
};

struct GapReport {
  std::vector<GapEntry> entries;
  ReferenceKind reference = ReferenceKind::exact;  // heuristic if any entry used one
};

GapEntry make_gap(double model_length, double reference_length);

}  // namespace droute
