#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "droute/rng.hpp"

namespace droute {

struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

double distance(const Point& a, const Point& b) noexcept;

// Node coordinates of a routing instance, normalized into the unit square.
struct Instance {
  std::vector<Point> coords;

  std::size_t size() const noexcept { return coords.size(); }
  // Throws ParameterError unless n >= 2 and every coordinate is finite and in
  // [0, 1].
  void validate() const;
  friend bool operator==(const Instance&, const Instance&) = default;
};

// Capacitated instance: `base` holds the customers only; the depot is kept
// separately and carries no demand.
struct CvrpInstance {
  Instance base;
  Point depot;
  std::vector<int> demands;             // each in {1, ..., 9}
  int capacity = 0;                     // D
  std::vector<double> normalized_demands;  // demands[i] / capacity

  std::size_t size() const noexcept { return base.size(); }
  void validate() const;
  friend bool operator==(const CvrpInstance&, const CvrpInstance&) = default;
};

using AnyInstance = std::variant<Instance, CvrpInstance>;

enum class ProblemType { tsp, cvrp };

ProblemType problem_type(const AnyInstance& inst) noexcept;
// Number of customers (TSP: number of cities).
std::size_t customer_count(const AnyInstance& inst) noexcept;

enum class DistributionKind { uniform, explosion, implosion, expansion, cluster, grid };

inline constexpr std::array<DistributionKind, 6> kAllDistributionKinds = {
    DistributionKind::uniform,  DistributionKind::explosion, DistributionKind::implosion,
    DistributionKind::expansion, DistributionKind::cluster,  DistributionKind::grid};

std::string_view to_string(DistributionKind kind) noexcept;
// Throws ParameterError on an unknown name.
DistributionKind parse_distribution_kind(std::string_view name);

// A distribution together with its generator parameters. Per-instance random
// quantities (explosion center and radius, cluster centers, ...) are drawn
// fresh for every instance.
struct DistributionSpec {
  DistributionKind kind = DistributionKind::uniform;
  int clusters = 0;                // 0 selects default_cluster_count(n)
  double cluster_spread = 0.05;    // Gaussian sigma around each center
  double radius_min = 0.2;         // explosion / implosion radius range
  double radius_max = 0.4;
  double implosion_factor = 0.1;   // contraction toward the center
  double push_mean = 0.1;          // mean of the exponential displacement
  double tube_width = 0.1;         // expansion band half-width
  double grid_jitter = 0.01;       // uniform perturbation of lattice points

  void validate(std::size_t n) const;
};

// 2 clusters at n = 50, 4 at n = 100, max(2, round(n / 25)) in general.
int default_cluster_count(std::size_t n) noexcept;

// Maps raw coordinates onto the unit square by one common scale factor and a
// centering shift of the shorter axis.
struct NormalizeTransform {
  double scale = 1.0;
  double offset_x = 0.0;  // raw x -> (x - min_x) * scale + offset_x
  double offset_y = 0.0;
  double min_x = 0.0;
  double min_y = 0.0;
  bool identity = true;

  Point apply(const Point& p) const noexcept;
  Point invert(const Point& p) const noexcept;
};

// Computes the transform for `points` (at least two distinct points). Clouds
// already inside the unit square whose longer axis spans at least 0.95 map to
// the identity.
NormalizeTransform fit_normalization(std::span<const Point> points);
std::vector<Point> normalize(std::span<const Point> points);

// Raw (unnormalized) points of a distribution. Exposed for tests.
std::vector<Point> generate_raw(const DistributionSpec& dist, std::size_t n, Rng& rng);
Instance generate(const DistributionSpec& dist, std::size_t n, std::uint64_t seed);

CvrpInstance attach_vrp(const Instance& inst, int capacity, std::uint64_t seed);

// Paper-scale capacity for a customer count: 40 for n <= 50, 50 above.
int default_capacity(std::size_t n) noexcept;

struct GroupSpec {
  DistributionSpec dist;
  std::size_t count = 0;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::optional<int> capacity;  // set for CVRP groups
};

struct InstanceGroup {
  int group_id = 0;
  DistributionKind kind = DistributionKind::uniform;
  std::vector<AnyInstance> instances;
};

struct GroupedDataset {
  std::vector<InstanceGroup> groups;

  std::size_t group_count() const noexcept { return groups.size(); }
  std::size_t total_size() const noexcept;
  // Throws DatasetError on gaps in group ids or an empty group.
  void validate() const;
};

std::vector<AnyInstance> generate_group(const GroupSpec& spec);
GroupedDataset build_group_dataset(std::span<const GroupSpec> specs);

// The eight symmetries of the unit square, identity first:
// (x,y) (1-x,y) (x,1-y) (1-x,1-y) (y,x) (1-y,x) (y,1-x) (1-y,1-x).
Point dihedral_image(const Point& p, int which) noexcept;
std::array<Instance, 8> augment_x8(const Instance& inst);
std::array<CvrpInstance, 8> augment_x8(const CvrpInstance& inst);
AnyInstance augment(const AnyInstance& inst, int which);

}  // namespace droute
