#include "droute/tsplib.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "droute/error.hpp"

namespace droute {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string upper(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class LineReader {
 public:
  explicit LineReader(std::string_view text) : in_(std::string(text)) {}

  bool next(std::string& line) {
    while (std::getline(in_, line)) {
      ++lineno_;
      line = trim(line);
      if (!line.empty()) return true;
    }
    return false;
  }
  std::size_t lineno() const noexcept { return lineno_; }
  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError("line " + std::to_string(lineno_) + ": " + what);
  }

 private:
  std::istringstream in_;
  std::size_t lineno_ = 0;
};

}  // namespace

BenchmarkInstance parse_tsplib(std::string_view text) {
  BenchmarkInstance b;
  LineReader rd(text);
  std::string line;
  std::optional<std::size_t> dim;
  std::string type;
  bool have_coords = false, have_demands = false, have_depot = false;

  auto need_dim = [&]() -> std::size_t {
    if (!dim) rd.fail("section before DIMENSION");
    return *dim;
  };

  bool pending = rd.next(line);
  while (pending) {
    const std::string key_upper = upper(line);
    if (key_upper == "EOF") break;

    if (key_upper.rfind("NODE_COORD_SECTION", 0) == 0) {
      const std::size_t n = need_dim();
      if (b.edge_weight_type != "EUC_2D") throw UnsupportedFormatError("edge weight type " + b.edge_weight_type);
      b.coords.assign(n, Point{});
      std::vector<bool> seen(n, false);
      for (std::size_t i = 0; i < n; ++i) {
        if (!rd.next(line)) rd.fail("NODE_COORD_SECTION ends after " + std::to_string(i) + " of " + std::to_string(n) + " nodes");
        std::istringstream ls(line);
        long id = 0;
        double x = 0, y = 0;
        if (!(ls >> id >> x >> y)) rd.fail("expected '<id> <x> <y>'");
        if (id < 1 || static_cast<std::size_t>(id) > n || seen[id - 1]) rd.fail("bad node id " + std::to_string(id));
        seen[id - 1] = true;
        b.coords[id - 1] = {x, y};
      }
      have_coords = true;
      pending = rd.next(line);
      continue;
    }
    if (key_upper.rfind("DEMAND_SECTION", 0) == 0) {
      const std::size_t n = need_dim();
      b.demands.assign(n, 0);
      for (std::size_t i = 0; i < n; ++i) {
        if (!rd.next(line)) rd.fail("DEMAND_SECTION is shorter than DIMENSION");
        std::istringstream ls(line);
        long id = 0;
        int d = 0;
        if (!(ls >> id >> d)) rd.fail("expected '<id> <demand>'");
        if (id < 1 || static_cast<std::size_t>(id) > n || d < 0) rd.fail("bad demand entry");
        b.demands[id - 1] = d;
      }
      have_demands = true;
      pending = rd.next(line);
      continue;
    }
    if (key_upper.rfind("DEPOT_SECTION", 0) == 0) {
      const std::size_t n = need_dim();
      bool first = true;
      while ((pending = rd.next(line))) {
        long id = 0;
        std::istringstream ls(line);
        if (!(ls >> id)) break;  // next keyword
        if (id == -1) {
          pending = rd.next(line);
          break;
        }
        if (id < 1 || static_cast<std::size_t>(id) > n) rd.fail("bad depot id");
        if (!first) throw UnsupportedFormatError("multiple depots");
        b.depot = static_cast<std::size_t>(id - 1);
        first = false;
      }
      if (first) rd.fail("DEPOT_SECTION lists no depot");
      have_depot = true;
      continue;
    }

    const auto colon = line.find(':');
    if (colon == std::string::npos) rd.fail("unexpected line '" + line + "'");
    const std::string key = upper(trim(std::string_view(line).substr(0, colon)));
    const std::string value = trim(std::string_view(line).substr(colon + 1));
    if (key == "NAME") {
      b.name = value;
    } else if (key == "TYPE") {
      type = upper(value);
      if (type == "TSP") b.problem = ProblemType::tsp;
      else if (type == "CVRP") b.problem = ProblemType::cvrp;
      else throw UnsupportedFormatError("problem type " + value);
    } else if (key == "DIMENSION") {
      try {
        std::size_t used = 0;
        const long d = std::stol(value, &used);
        if (used != value.size() || d < 2) throw ParseError("");
        dim = static_cast<std::size_t>(d);
      } catch (const std::exception&) {
        rd.fail("bad DIMENSION '" + value + "'");
      }
    } else if (key == "EDGE_WEIGHT_TYPE") {
      b.edge_weight_type = upper(value);
      if (b.edge_weight_type != "EUC_2D") throw UnsupportedFormatError("edge weight type " + value);
    } else if (key == "CAPACITY") {
      try {
        b.capacity = std::stoi(value);
      } catch (const std::exception&) {
        rd.fail("bad CAPACITY '" + value + "'");
      }
    } else if (key == "COMMENT" || key == "EDGE_WEIGHT_FORMAT" || key == "NODE_COORD_TYPE" ||
               key == "DISPLAY_DATA_TYPE") {
      // informational
    } else {
      rd.fail("unknown keyword " + key);
    }
    pending = rd.next(line);
  }

  if (type.empty()) throw ParseError("missing TYPE");
  if (!dim) throw ParseError("missing DIMENSION");
  if (!have_coords) throw ParseError("missing NODE_COORD_SECTION");
  if (b.problem == ProblemType::cvrp) {
    if (!have_demands) throw ParseError("CVRP file without DEMAND_SECTION");
    if (b.capacity <= 0) throw ParseError("CVRP file without a positive CAPACITY");
    if (!have_depot) b.depot = 0;
    if (b.demands[b.depot] != 0) throw ParseError("depot carries a demand");
    for (std::size_t i = 0; i < b.demands.size(); ++i) {
      if (i != b.depot && b.demands[i] > b.capacity) throw ParseError("demand exceeds capacity");
    }
  }
  return b;
}

BenchmarkInstance read_tsplib(const std::filesystem::path& path) { return parse_tsplib(slurp(path)); }

std::string serialize_tsplib(const BenchmarkInstance& b) {
  std::ostringstream out;
  char buf[128];
  out << "NAME : " << b.name << "\n";
  out << "TYPE : " << (b.problem == ProblemType::tsp ? "TSP" : "CVRP") << "\n";
  out << "DIMENSION : " << b.dimension() << "\n";
  out << "EDGE_WEIGHT_TYPE : " << b.edge_weight_type << "\n";
  if (b.problem == ProblemType::cvrp) out << "CAPACITY : " << b.capacity << "\n";
  out << "NODE_COORD_SECTION\n";
  for (std::size_t i = 0; i < b.coords.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu %.17g %.17g\n", i + 1, b.coords[i].x, b.coords[i].y);
    out << buf;
  }
  if (b.problem == ProblemType::cvrp) {
    out << "DEMAND_SECTION\n";
    for (std::size_t i = 0; i < b.demands.size(); ++i) out << i + 1 << " " << b.demands[i] << "\n";
    out << "DEPOT_SECTION\n" << b.depot + 1 << "\n-1\n";
  }
  out << "EOF\n";
  return out.str();
}

long tsplib_distance(const Point& p, const Point& q) noexcept {
  const double dx = p.x - q.x, dy = p.y - q.y;
  return static_cast<long>(std::sqrt(dx * dx + dy * dy) + 0.5);
}

ScaledInstance to_model_input(const BenchmarkInstance& b) {
  ScaledInstance s;
  s.transform = fit_normalization(b.coords);
  std::vector<Point> pts;
  pts.reserve(b.coords.size());
  for (const auto& p : b.coords) pts.push_back(s.transform.apply(p));

  if (b.problem == ProblemType::tsp) {
    Instance inst{std::move(pts)};
    inst.validate();
    s.instance = std::move(inst);
    return s;
  }
  CvrpInstance c;
  c.depot = pts[b.depot];
  c.capacity = b.capacity;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (i == b.depot) continue;
    s.customers.push_back(i);
    c.base.coords.push_back(pts[i]);
    c.demands.push_back(b.demands[i]);
    c.normalized_demands.push_back(static_cast<double>(b.demands[i]) / b.capacity);
  }
  s.instance = std::move(c);
  return s;
}

long benchmark_length(const BenchmarkInstance& b, const std::vector<std::size_t>& order) {
  if (order.size() != b.dimension()) throw ContractError("tour does not visit every node once");
  std::vector<bool> seen(order.size(), false);
  for (const auto v : order) {
    if (v >= order.size() || seen[v]) throw ContractError("tour is not a permutation");
    seen[v] = true;
  }
  long total = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    total += tsplib_distance(b.coords[order[i]], b.coords[order[(i + 1) % order.size()]]);
  }
  return total;
}

long benchmark_length(const BenchmarkInstance& b, const ScaledInstance& s, const Tour& tour) {
  validate_tour(s.instance, tour);
  if (b.problem == ProblemType::tsp) {
    std::vector<std::size_t> order(tour.nodes.begin(), tour.nodes.end());
    return benchmark_length(b, order);
  }
  auto file_node = [&](int id) { return id == 0 ? b.depot : s.customers[static_cast<std::size_t>(id - 1)]; };
  long total = 0;
  for (std::size_t i = 0; i + 1 < tour.nodes.size(); ++i) {
    total += tsplib_distance(b.coords[file_node(tour.nodes[i])], b.coords[file_node(tour.nodes[i + 1])]);
  }
  return total;
}

std::map<std::string, double> read_best_known(const std::filesystem::path& path) {
  std::istringstream in(slurp(path));
  std::map<std::string, double> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto h = line.find('#'); h != std::string::npos) line.resize(h);
    std::istringstream ls(line);
    std::string name;
    double v = 0;
    if (!(ls >> name)) continue;
    if (!(ls >> v)) throw ParseError(path.string() + ":" + std::to_string(lineno) + ": expected '<name> <value>'");
    out[name] = v;
  }
  return out;
}

std::vector<std::size_t> read_tour_file(const std::filesystem::path& path) {
  std::istringstream in(slurp(path));
  std::string line;
  bool in_section = false;
  std::vector<std::size_t> tour;
  while (std::getline(in, line)) {
    line = trim(line);
    if (!in_section) {
      in_section = upper(line).rfind("TOUR_SECTION", 0) == 0;
      continue;
    }
    std::istringstream ls(line);
    long id = 0;
    while (ls >> id) {
      if (id == -1) return tour;
      if (id < 1) throw ParseError("bad node id in tour file");
      tour.push_back(static_cast<std::size_t>(id - 1));
    }
  }
  if (!in_section) throw ParseError("tour file has no TOUR_SECTION");
  return tour;
}

}  // namespace droute
