#include "droute/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <tuple>

#include "droute/error.hpp"

namespace droute {

namespace {

class DistanceMatrix {
 public:
  explicit DistanceMatrix(std::span<const Point> pts) : n_(pts.size()), d_(n_ * n_) {
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < n_; ++j) d_[i * n_ + j] = distance(pts[i], pts[j]);
  }
  double operator()(std::size_t i, std::size_t j) const noexcept { return d_[i * n_ + j]; }
  std::size_t size() const noexcept { return n_; }

 private:
  std::size_t n_;
  std::vector<double> d_;
};

// 2-opt over a closed cycle; position 0 never moves.
void two_opt_cycle(std::vector<int>& t, const DistanceMatrix& d) {
  const std::size_t n = t.size();
  if (n < 4) return;
  bool improved = true;
  while (improved) {
    improved = false;
    for (std::size_t i = 0; i + 2 < n; ++i) {
      for (std::size_t j = i + 2; j < n; ++j) {
        if (i == 0 && j == n - 1) continue;  // the two edges share node t[0]
        const auto a = static_cast<std::size_t>(t[i]), b = static_cast<std::size_t>(t[i + 1]);
        const auto c = static_cast<std::size_t>(t[j]), e = static_cast<std::size_t>(t[(j + 1) % n]);
        const double delta = d(a, c) + d(b, e) - d(a, b) - d(c, e);
        if (delta < -1e-12) {
          std::reverse(t.begin() + static_cast<std::ptrdiff_t>(i + 1), t.begin() + static_cast<std::ptrdiff_t>(j + 1));
          improved = true;
        }
      }
    }
  }
}

bool point_less(const Point& a, const Point& b) noexcept { return std::tie(a.x, a.y) < std::tie(b.x, b.y); }

}  // namespace

double tour_length(const Instance& inst, const Tour& tour) {
  validate_tour(inst, tour);
  const auto& t = tour.nodes;
  double len = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    len += distance(inst.coords[static_cast<std::size_t>(t[i])],
                    inst.coords[static_cast<std::size_t>(t[(i + 1) % t.size()])]);
  }
  return len;
}

double tour_length(const CvrpInstance& inst, const Tour& tour) {
  validate_tour(inst, tour);
  auto at = [&inst](int v) -> const Point& {
    return v == 0 ? inst.depot : inst.base.coords[static_cast<std::size_t>(v - 1)];
  };
  double len = 0.0;
  for (std::size_t i = 0; i + 1 < tour.nodes.size(); ++i) len += distance(at(tour.nodes[i]), at(tour.nodes[i + 1]));
  return len;
}

double tour_length(const AnyInstance& inst, const Tour& tour) {
  return std::visit([&tour](const auto& i) { return tour_length(i, tour); }, inst);
}

Tour held_karp(const Instance& inst) {
  const std::size_t n = inst.size();
  if (n < 2) throw ParameterError("held_karp needs at least 2 nodes");
  if (n > kHeldKarpMaxNodes) throw SizeError("held_karp supports at most 13 nodes");
  if (n == 2) return Tour{{0, 1}};
  const DistanceMatrix d(inst.coords);
  // Bit b of a subset stands for node b + 1. dp[S][v]: shortest path that
  // starts at 0, covers exactly S and ends at v (v in S).
  const std::size_t m = n - 1;
  const std::size_t full = (std::size_t{1} << m) - 1;
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dp((full + 1) * m, inf);
  auto cell = [&](std::size_t s, std::size_t v) -> double& { return dp[s * m + v]; };
  for (std::size_t v = 0; v < m; ++v) cell(std::size_t{1} << v, v) = d(0, v + 1);
  for (std::size_t s = 1; s <= full; ++s) {
    for (std::size_t v = 0; v < m; ++v) {
      if (!(s >> v & 1)) continue;
      const double base = cell(s, v);
      if (base == inf) continue;
      for (std::size_t w = 0; w < m; ++w) {
        if (s >> w & 1) continue;
        double& next = cell(s | std::size_t{1} << w, w);
        next = std::min(next, base + d(v + 1, w + 1));
      }
    }
  }
  double best = inf;
  for (std::size_t v = 0; v < m; ++v) best = std::min(best, cell(full, v) + d(v + 1, 0));

  // Walk forward from 0, always taking the smallest node that still admits
  // an optimal completion. dp[R + v][v] doubles as the cheapest v -> R -> 0
  // path because distances are symmetric.
  const double tol = 1e-9 * std::max(1.0, best);
  Tour tour{{0}};
  std::size_t remaining = full;
  std::size_t current = 0;
  double prefix = 0.0;
  while (remaining != 0) {
    for (std::size_t v = 0; v < m; ++v) {
      if (!(remaining >> v & 1)) continue;
      const double step = prefix + d(current, v + 1);
      if (step + cell(remaining, v) <= best + tol) {
        tour.nodes.push_back(static_cast<int>(v + 1));
        prefix = step;
        current = v + 1;
        remaining &= ~(std::size_t{1} << v);
        break;
      }
    }
  }
  return tour;
}

Tour nearest_neighbor(const Instance& inst, int start) {
  const std::size_t n = inst.size();
  if (start < 0 || static_cast<std::size_t>(start) >= n) throw ParameterError("nearest_neighbor: bad start");
  std::vector<std::uint8_t> used(n, 0);
  Tour tour;
  tour.nodes.reserve(n);
  auto cur = static_cast<std::size_t>(start);
  used[cur] = 1;
  tour.nodes.push_back(start);
  for (std::size_t step = 1; step < n; ++step) {
    std::size_t best = n;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (used[j]) continue;
      const double dj = distance(inst.coords[cur], inst.coords[j]);
      if (dj < best_d) {
        best_d = dj;
        best = j;
      }
    }
    used[best] = 1;
    tour.nodes.push_back(static_cast<int>(best));
    cur = best;
  }
  return tour;
}

Tour two_opt(const Instance& inst, Tour tour) {
  validate_tour(inst, tour);
  const DistanceMatrix d(inst.coords);
  two_opt_cycle(tour.nodes, d);
  return tour;
}

Tour cvrp_reference(const CvrpInstance& inst) {
  inst.validate();
  const std::size_t n = inst.size();
  // Node 0 is the depot, customer i is node i + 1.
  std::vector<Point> pts;
  pts.reserve(n + 1);
  pts.push_back(inst.depot);
  pts.insert(pts.end(), inst.base.coords.begin(), inst.base.coords.end());
  const DistanceMatrix d(pts);

  struct Saving {
    double value;
    std::size_t i, j;
  };
  std::vector<Saving> savings;
  savings.reserve(n * (n - 1) / 2);
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = i + 1; j <= n; ++j) savings.push_back({d(0, i) + d(0, j) - d(i, j), i, j});
  // Ties broken by coordinates, never by input order.
  auto key = [&pts](const Saving& s) {
    const Point& a = point_less(pts[s.i], pts[s.j]) ? pts[s.i] : pts[s.j];
    const Point& b = point_less(pts[s.i], pts[s.j]) ? pts[s.j] : pts[s.i];
    return std::make_tuple(-s.value, a.x, a.y, b.x, b.y);
  };
  std::sort(savings.begin(), savings.end(), [&](const Saving& a, const Saving& b) { return key(a) < key(b); });

  std::vector<std::vector<int>> routes(n + 1);
  std::vector<std::size_t> route_of(n + 1);
  std::vector<int> load(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    routes[i] = {static_cast<int>(i)};
    route_of[i] = i;
    load[i] = inst.demands[i - 1];
  }
  for (const auto& s : savings) {
    if (s.value <= 0.0) break;
    const std::size_t ra = route_of[s.i], rb = route_of[s.j];
    if (ra == rb || load[ra] + load[rb] > inst.capacity) continue;
    auto& a = routes[ra];
    auto& b = routes[rb];
    const int vi = static_cast<int>(s.i), vj = static_cast<int>(s.j);
    const bool i_end = a.back() == vi || a.front() == vi;
    const bool j_end = b.back() == vj || b.front() == vj;
    if (!i_end || !j_end) continue;
    if (a.back() != vi) std::reverse(a.begin(), a.end());
    if (b.front() != vj) std::reverse(b.begin(), b.end());
    a.insert(a.end(), b.begin(), b.end());
    load[ra] += load[rb];
    for (const int v : b) route_of[static_cast<std::size_t>(v)] = ra;
    b.clear();
    load[rb] = 0;
  }

  std::vector<std::vector<int>> final_routes;
  for (auto& r : routes) {
    if (r.empty()) continue;
    std::vector<int> cycle{0};
    cycle.insert(cycle.end(), r.begin(), r.end());
    two_opt_cycle(cycle, d);
    std::vector<int> route(cycle.begin() + 1, cycle.end());
    if (point_less(pts[static_cast<std::size_t>(route.back())], pts[static_cast<std::size_t>(route.front())])) {
      std::reverse(route.begin(), route.end());
    }
    final_routes.push_back(std::move(route));
  }
  std::sort(final_routes.begin(), final_routes.end(), [&pts](const auto& a, const auto& b) {
    return point_less(pts[static_cast<std::size_t>(a.front())], pts[static_cast<std::size_t>(b.front())]);
  });

  Tour tour{{0}};
  for (const auto& r : final_routes) {
    tour.nodes.insert(tour.nodes.end(), r.begin(), r.end());
    tour.nodes.push_back(0);
  }
  return tour;
}

Reference reference_solution(const AnyInstance& inst) {
  Reference ref;
  if (const auto* tsp = std::get_if<Instance>(&inst)) {
    if (tsp->size() <= kHeldKarpMaxNodes) {
      ref.tour = held_karp(*tsp);
      ref.kind = ReferenceKind::exact;
    } else {
      ref.tour = two_opt(*tsp, nearest_neighbor(*tsp, 0));
      ref.kind = ReferenceKind::heuristic;
    }
  } else {
    ref.tour = cvrp_reference(std::get<CvrpInstance>(inst));
    ref.kind = ReferenceKind::heuristic;
  }
  ref.length = tour_length(inst, ref.tour);
  return ref;
}

GapEntry make_gap(double model_length, double reference_length) {
  if (!(reference_length > 0.0)) throw ContractError("reference length must be positive");
  return {model_length, reference_length, model_length / reference_length - 1.0};
}

}  // namespace droute
