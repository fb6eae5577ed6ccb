#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "droute/instance.hpp"
#include "droute/policy.hpp"

namespace droute {

// A TSPLIB / CVRPLIB instance in its original units.
struct BenchmarkInstance {
  std::string name;
  ProblemType problem = ProblemType::tsp;
  std::string edge_weight_type = "EUC_2D";
  std::vector<Point> coords;       // file order, node k at index k-1
  std::vector<int> demands;        // CVRP: one per node, depot included
  int capacity = 0;                // CVRP only
  std::size_t depot = 0;           // CVRP: 0-based node index
  std::optional<double> best_known;

  std::size_t dimension() const noexcept { return coords.size(); }
  friend bool operator==(const BenchmarkInstance&, const BenchmarkInstance&) = default;
};

// Accepts TYPE TSP or CVRP with EDGE_WEIGHT_TYPE EUC_2D. Throws
// UnsupportedFormatError for other edge-weight types and ParseError for
// malformed input or a section that disagrees with DIMENSION.
BenchmarkInstance parse_tsplib(std::string_view text);
BenchmarkInstance read_tsplib(const std::filesystem::path& path);
std::string serialize_tsplib(const BenchmarkInstance& bench);

// TSPLIB EUC_2D: Euclidean distance rounded half up to an integer.
long tsplib_distance(const Point& p, const Point& q) noexcept;

// Normalized model instance plus what is needed to score its tours in
// original units. For CVRP, model customer i is file node customers[i].
struct ScaledInstance {
  AnyInstance instance;
  NormalizeTransform transform;
  std::vector<std::size_t> customers;
};

ScaledInstance to_model_input(const BenchmarkInstance& bench);

// Integer objective of a model tour, recomputed on the raw coordinates.
long benchmark_length(const BenchmarkInstance& bench, const ScaledInstance& scaled, const Tour& tour);
// Same for a tour given as 0-based file node ids (TSP only).
long benchmark_length(const BenchmarkInstance& bench, const std::vector<std::size_t>& order);

// Sidecar table: "<name> <value>" per line, '#' comments.
std::map<std::string, double> read_best_known(const std::filesystem::path& path);

// Optimal tour file (TOUR_SECTION, 1-based ids, -1 terminator) as 0-based ids.
std::vector<std::size_t> read_tour_file(const std::filesystem::path& path);

}  // namespace droute
