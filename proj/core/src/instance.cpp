#include "droute/instance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "droute/error.hpp"

namespace droute {

namespace {

bool in_unit_square(const Point& p) noexcept {
  return std::isfinite(p.x) && std::isfinite(p.y) && p.x >= 0.0 && p.x <= 1.0 && p.y >= 0.0 &&
         p.y <= 1.0;
}

double clamp01(double v) noexcept { return std::clamp(v, 0.0, 1.0); }

std::vector<Point> uniform_points(std::size_t n, Rng& rng) {
  std::vector<Point> pts(n);
  for (auto& p : pts) {
    p.x = rng.uniform();
    p.y = rng.uniform();
  }
  return pts;
}

Point random_unit_vector(Rng& rng) {
  const double angle = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
  return {std::cos(angle), std::sin(angle)};
}

void explode(std::vector<Point>& pts, const DistributionSpec& d, Rng& rng) {
  const Point c{rng.uniform(), rng.uniform()};
  const double radius = rng.uniform(d.radius_min, d.radius_max);
  for (auto& p : pts) {
    const double r = distance(p, c);
    if (r >= radius) continue;
    Point u = r > 0.0 ? Point{(p.x - c.x) / r, (p.y - c.y) / r} : random_unit_vector(rng);
    const double reach = radius + rng.exponential(d.push_mean);
    p = {c.x + reach * u.x, c.y + reach * u.y};
  }
}

void implode(std::vector<Point>& pts, const DistributionSpec& d, Rng& rng) {
  const Point c{rng.uniform(), rng.uniform()};
  const double radius = rng.uniform(d.radius_min, d.radius_max);
  for (auto& p : pts) {
    if (distance(p, c) >= radius) continue;
    p = {c.x + d.implosion_factor * (p.x - c.x), c.y + d.implosion_factor * (p.y - c.y)};
  }
}

void expand(std::vector<Point>& pts, const DistributionSpec& d, Rng& rng) {
  const bool horizontal = rng.uniform() < 0.5;
  const double at = rng.uniform();
  for (auto& p : pts) {
    double& coord = horizontal ? p.y : p.x;
    const double offset = coord - at;
    if (std::abs(offset) >= d.tube_width) continue;
    const double side = offset < 0.0 ? -1.0 : 1.0;
    coord = at + side * (d.tube_width + rng.exponential(d.push_mean));
  }
}

std::vector<Point> grid_points(std::size_t n, const DistributionSpec& d, Rng& rng) {
  const auto side = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
  std::vector<std::size_t> cells(side * side);
  std::iota(cells.begin(), cells.end(), std::size_t{0});
  // Partial Fisher-Yates: the first n cells are a uniform sample without
  // replacement.
  for (std::size_t i = 0; i < n; ++i) {
    const auto j = static_cast<std::size_t>(
        rng.uniform_int(static_cast<std::int64_t>(i), static_cast<std::int64_t>(cells.size() - 1)));
    std::swap(cells[i], cells[j]);
  }
  std::vector<Point> pts(n);
  const double step = 1.0 / static_cast<double>(side);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t row = cells[i] / side;
    const std::size_t col = cells[i] % side;
    pts[i].x = (static_cast<double>(col) + 0.5) * step;
    pts[i].y = (static_cast<double>(row) + 0.5) * step;
    if (d.grid_jitter > 0.0) {
      pts[i].x += rng.uniform(-d.grid_jitter, d.grid_jitter);
      pts[i].y += rng.uniform(-d.grid_jitter, d.grid_jitter);
    }
  }
  return pts;
}

std::vector<Point> cluster_points(std::size_t n, const DistributionSpec& d, Rng& rng) {
  const int k = d.clusters > 0 ? d.clusters : default_cluster_count(n);
  std::vector<Point> centers(static_cast<std::size_t>(k));
  for (auto& c : centers) c = {rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8)};
  std::vector<Point> pts(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Point& c = centers[i % centers.size()];
    Point p;
    do {
      p = {c.x + rng.normal(0.0, d.cluster_spread), c.y + rng.normal(0.0, d.cluster_spread)};
    } while (!in_unit_square(p));
    pts[i] = p;
  }
  return pts;
}

}  // namespace

double distance(const Point& a, const Point& b) noexcept {
  return std::hypot(a.x - b.x, a.y - b.y);
}

void Instance::validate() const {
  if (coords.size() < 2) throw ParameterError("instance needs at least 2 nodes");
  for (const auto& p : coords) {
    if (!in_unit_square(p)) throw ParameterError("instance coordinate outside [0,1]^2 or not finite");
  }
}

void CvrpInstance::validate() const {
  if (base.coords.empty()) throw ParameterError("CVRP instance needs at least 1 customer");
  for (const auto& p : base.coords) {
    if (!in_unit_square(p)) throw ParameterError("customer coordinate outside [0,1]^2");
  }
  if (!in_unit_square(depot)) throw ParameterError("depot outside [0,1]^2");
  if (capacity <= 0) throw ParameterError("capacity must be positive");
  if (demands.size() != base.size() || normalized_demands.size() != base.size()) {
    throw ParameterError("demand vector length does not match customer count");
  }
  for (std::size_t i = 0; i < demands.size(); ++i) {
    if (demands[i] < 1 || demands[i] > capacity) throw ParameterError("demand out of range");
    if (normalized_demands[i] != static_cast<double>(demands[i]) / capacity) {
      throw ParameterError("normalized demand inconsistent with demand / capacity");
    }
  }
}

ProblemType problem_type(const AnyInstance& inst) noexcept {
  return std::holds_alternative<Instance>(inst) ? ProblemType::tsp : ProblemType::cvrp;
}

std::size_t customer_count(const AnyInstance& inst) noexcept {
  return std::visit([](const auto& i) { return i.size(); }, inst);
}

std::string_view to_string(DistributionKind kind) noexcept {
  switch (kind) {
    case DistributionKind::uniform: return "uniform";
    case DistributionKind::explosion: return "explosion";
    case DistributionKind::implosion: return "implosion";
    case DistributionKind::expansion: return "expansion";
    case DistributionKind::cluster: return "cluster";
    case DistributionKind::grid: return "grid";
  }
  return "unknown";
}

DistributionKind parse_distribution_kind(std::string_view name) {
  for (const auto kind : kAllDistributionKinds) {
    if (to_string(kind) == name) return kind;
  }
  throw ParameterError("unknown distribution kind: " + std::string(name));
}

void DistributionSpec::validate(std::size_t n) const {
  if (n < 2) throw ParameterError("node count must be at least 2");
  switch (kind) {
    case DistributionKind::uniform: break;
    case DistributionKind::explosion:
    case DistributionKind::implosion:
      if (!(radius_min > 0.0) || !(radius_max >= radius_min)) {
        throw ParameterError("radius range must satisfy 0 < min <= max");
      }
      if (kind == DistributionKind::explosion && !(push_mean > 0.0)) {
        throw ParameterError("push mean must be positive");
      }
      if (kind == DistributionKind::implosion && !(implosion_factor > 0.0 && implosion_factor < 1.0)) {
        throw ParameterError("implosion factor must lie in (0, 1)");
      }
      break;
    case DistributionKind::expansion:
      if (!(tube_width > 0.0) || !(push_mean > 0.0)) {
        throw ParameterError("tube width and push mean must be positive");
      }
      break;
    case DistributionKind::cluster: {
      const int k = clusters > 0 ? clusters : default_cluster_count(n);
      if (clusters < 0) throw ParameterError("cluster count must be >= 1");
      if (static_cast<std::size_t>(k) > n) throw ParameterError("cluster count exceeds node count");
      if (!(cluster_spread >= 0.0)) throw ParameterError("cluster spread must be >= 0");
      break;
    }
    case DistributionKind::grid:
      if (!(grid_jitter >= 0.0)) throw ParameterError("grid jitter must be >= 0");
      break;
  }
}

int default_cluster_count(std::size_t n) noexcept {
  return std::max(2, static_cast<int>(std::lround(static_cast<double>(n) / 25.0)));
}

Point NormalizeTransform::apply(const Point& p) const noexcept {
  if (identity) return p;
  return {clamp01((p.x - min_x) * scale + offset_x), clamp01((p.y - min_y) * scale + offset_y)};
}

Point NormalizeTransform::invert(const Point& p) const noexcept {
  if (identity) return p;
  return {(p.x - offset_x) / scale + min_x, (p.y - offset_y) / scale + min_y};
}

NormalizeTransform fit_normalization(std::span<const Point> points) {
  if (points.size() < 2) throw DegenerateInputError("normalize needs at least 2 points");
  double lo_x = points[0].x, hi_x = points[0].x, lo_y = points[0].y, hi_y = points[0].y;
  bool inside = true;
  for (const auto& p : points) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      throw DegenerateInputError("normalize: non-finite coordinate");
    }
    lo_x = std::min(lo_x, p.x);
    hi_x = std::max(hi_x, p.x);
    lo_y = std::min(lo_y, p.y);
    hi_y = std::max(hi_y, p.y);
    inside = inside && in_unit_square(p);
  }
  const double range_x = hi_x - lo_x;
  const double range_y = hi_y - lo_y;
  const double range = std::max(range_x, range_y);
  if (!(range > 0.0)) throw DegenerateInputError("normalize: all points identical");

  NormalizeTransform t;
  if (inside && range >= 0.95) return t;
  t.identity = false;
  t.scale = 1.0 / range;
  t.min_x = lo_x;
  t.min_y = lo_y;
  t.offset_x = 0.5 * (1.0 - range_x / range);
  t.offset_y = 0.5 * (1.0 - range_y / range);
  return t;
}

std::vector<Point> normalize(std::span<const Point> points) {
  const NormalizeTransform t = fit_normalization(points);
  std::vector<Point> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(t.apply(p));
  return out;
}

std::vector<Point> generate_raw(const DistributionSpec& dist, std::size_t n, Rng& rng) {
  dist.validate(n);
  switch (dist.kind) {
    case DistributionKind::uniform: return uniform_points(n, rng);
    case DistributionKind::explosion: {
      auto pts = uniform_points(n, rng);
      explode(pts, dist, rng);
      return pts;
    }
    case DistributionKind::implosion: {
      auto pts = uniform_points(n, rng);
      implode(pts, dist, rng);
      return pts;
    }
    case DistributionKind::expansion: {
      auto pts = uniform_points(n, rng);
      expand(pts, dist, rng);
      return pts;
    }
    case DistributionKind::cluster: return cluster_points(n, dist, rng);
    case DistributionKind::grid: return grid_points(n, dist, rng);
  }
  throw ParameterError("unhandled distribution kind");
}

Instance generate(const DistributionSpec& dist, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  const auto raw = generate_raw(dist, n, rng);
  Instance inst{normalize(raw)};
  inst.validate();
  return inst;
}

CvrpInstance attach_vrp(const Instance& inst, int capacity, std::uint64_t seed) {
  if (capacity < 9) throw ParameterError("capacity must be at least 9");
  Rng rng(seed);
  CvrpInstance out;
  out.base = inst;
  out.capacity = capacity;
  out.demands.resize(inst.size());
  out.normalized_demands.resize(inst.size());
  for (std::size_t i = 0; i < inst.size(); ++i) {
    out.demands[i] = static_cast<int>(rng.uniform_int(1, 9));
    out.normalized_demands[i] = static_cast<double>(out.demands[i]) / capacity;
  }
  out.depot = {rng.uniform(), rng.uniform()};
  return out;
}

int default_capacity(std::size_t n) noexcept { return n <= 50 ? 40 : 50; }

std::size_t GroupedDataset::total_size() const noexcept {
  std::size_t total = 0;
  for (const auto& g : groups) total += g.instances.size();
  return total;
}

void GroupedDataset::validate() const {
  if (groups.empty()) throw DatasetError("dataset has no groups");
  for (std::size_t i = 0; i < groups.size(); ++i) {
    if (groups[i].group_id != static_cast<int>(i)) {
      throw DatasetError("group ids must be 0..m-1 without gaps");
    }
    if (groups[i].instances.empty()) {
      throw DatasetError("group " + std::to_string(i) + " is empty");
    }
  }
}

std::vector<AnyInstance> generate_group(const GroupSpec& spec) {
  if (spec.count < 1) throw ParameterError("group count must be at least 1");
  spec.dist.validate(spec.n);
  std::vector<AnyInstance> out;
  out.reserve(spec.count);
  for (std::size_t i = 0; i < spec.count; ++i) {
    const std::uint64_t s = mix_seed(spec.seed, i);
    Instance inst = generate(spec.dist, spec.n, s);
    if (spec.capacity) {
      out.emplace_back(attach_vrp(inst, *spec.capacity, mix_seed(s, 0xC0FFEE)));
    } else {
      out.emplace_back(std::move(inst));
    }
  }
  return out;
}

GroupedDataset build_group_dataset(std::span<const GroupSpec> specs) {
  if (specs.empty()) throw ParameterError("dataset spec is empty");
  GroupedDataset ds;
  ds.groups.reserve(specs.size());
  for (std::size_t g = 0; g < specs.size(); ++g) {
    ds.groups.push_back({static_cast<int>(g), specs[g].dist.kind, generate_group(specs[g])});
  }
  return ds;
}

Point dihedral_image(const Point& p, int which) noexcept {
  switch (which & 7) {
    case 0: return {p.x, p.y};
    case 1: return {1.0 - p.x, p.y};
    case 2: return {p.x, 1.0 - p.y};
    case 3: return {1.0 - p.x, 1.0 - p.y};
    case 4: return {p.y, p.x};
    case 5: return {1.0 - p.y, p.x};
    case 6: return {p.y, 1.0 - p.x};
    default: return {1.0 - p.y, 1.0 - p.x};
  }
}

std::array<Instance, 8> augment_x8(const Instance& inst) {
  std::array<Instance, 8> out;
  for (int k = 0; k < 8; ++k) {
    out[k].coords.reserve(inst.size());
    for (const auto& p : inst.coords) out[k].coords.push_back(dihedral_image(p, k));
  }
  return out;
}

std::array<CvrpInstance, 8> augment_x8(const CvrpInstance& inst) {
  std::array<CvrpInstance, 8> out;
  const auto images = augment_x8(inst.base);
  for (int k = 0; k < 8; ++k) {
    out[k] = inst;
    out[k].base = images[k];
    out[k].depot = dihedral_image(inst.depot, k);
  }
  return out;
}

AnyInstance augment(const AnyInstance& inst, int which) {
  if (const auto* tsp = std::get_if<Instance>(&inst)) {
    Instance img;
    img.coords.reserve(tsp->size());
    for (const auto& p : tsp->coords) img.coords.push_back(dihedral_image(p, which));
    return img;
  }
  CvrpInstance img = std::get<CvrpInstance>(inst);
  for (auto& p : img.base.coords) p = dihedral_image(p, which);
  img.depot = dihedral_image(img.depot, which);
  return img;
}

}  // namespace droute
