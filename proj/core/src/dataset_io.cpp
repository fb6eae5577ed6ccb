#include "droute/dataset_io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "droute/error.hpp"

namespace droute {

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

bool next_content_line(std::istream& in, std::string& line, std::size_t& line_no) {
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
  }
  return false;
}

[[noreturn]] void fail(std::size_t line_no, const std::string& what) {
  throw ParseError("line " + std::to_string(line_no) + ": " + what);
}

Point read_point(std::istringstream& ss, std::size_t line_no) {
  Point p;
  if (!(ss >> p.x >> p.y)) fail(line_no, "expected 'x y'");
  return p;
}

}  // namespace

void write_record(std::ostream& out, const AnyInstance& inst) {
  if (const auto* tsp = std::get_if<Instance>(&inst)) {
    out << "TSP " << tsp->size() << '\n';
    for (const auto& p : tsp->coords) out << fmt17(p.x) << ' ' << fmt17(p.y) << '\n';
    return;
  }
  const auto& cvrp = std::get<CvrpInstance>(inst);
  out << "CVRP " << cvrp.size() << ' ' << cvrp.capacity << '\n';
  out << fmt17(cvrp.depot.x) << ' ' << fmt17(cvrp.depot.y) << " 0\n";
  for (std::size_t i = 0; i < cvrp.size(); ++i) {
    const auto& p = cvrp.base.coords[i];
    out << fmt17(p.x) << ' ' << fmt17(p.y) << ' ' << cvrp.demands[i] << '\n';
  }
}

void write_records(std::ostream& out, std::span<const AnyInstance> instances) {
  for (const auto& inst : instances) write_record(out, inst);
}

std::vector<AnyInstance> read_records(std::istream& in) {
  std::vector<AnyInstance> out;
  std::string line;
  std::size_t line_no = 0;
  while (next_content_line(in, line, line_no)) {
    std::istringstream header(line);
    std::string tag;
    long long n = 0;
    header >> tag >> n;
    if (!header || n < 1) fail(line_no, "expected 'TSP n' or 'CVRP n D'");
    if (tag == "TSP") {
      Instance inst;
      for (long long i = 0; i < n; ++i) {
        if (!next_content_line(in, line, line_no)) fail(line_no, "truncated TSP record");
        std::istringstream ss(line);
        inst.coords.push_back(read_point(ss, line_no));
      }
      try {
        inst.validate();
      } catch (const ParameterError& e) {
        fail(line_no, e.what());
      }
      out.emplace_back(std::move(inst));
    } else if (tag == "CVRP") {
      CvrpInstance inst;
      if (!(header >> inst.capacity)) fail(line_no, "CVRP header needs a capacity");
      if (!next_content_line(in, line, line_no)) fail(line_no, "missing depot line");
      {
        std::istringstream ss(line);
        inst.depot = read_point(ss, line_no);
      }
      for (long long i = 0; i < n; ++i) {
        if (!next_content_line(in, line, line_no)) fail(line_no, "truncated CVRP record");
        std::istringstream ss(line);
        inst.base.coords.push_back(read_point(ss, line_no));
        int d = 0;
        if (!(ss >> d)) fail(line_no, "customer line needs a demand");
        inst.demands.push_back(d);
        inst.normalized_demands.push_back(static_cast<double>(d) / inst.capacity);
      }
      try {
        inst.validate();
      } catch (const ParameterError& e) {
        fail(line_no, e.what());
      }
      out.emplace_back(std::move(inst));
    } else {
      fail(line_no, "unknown record tag '" + tag + "'");
    }
  }
  return out;
}

std::string group_file_name(DistributionKind kind, std::size_t n, std::uint64_t seed) {
  return std::string(to_string(kind)) + "_" + std::to_string(n) + "_" + std::to_string(seed) +
         ".txt";
}

std::filesystem::path save_group_file(const std::filesystem::path& dir, const GroupSpec& spec,
                                      std::span<const AnyInstance> instances) {
  std::filesystem::create_directories(dir);
  const auto path = dir / group_file_name(spec.dist.kind, spec.n, spec.seed);
  std::ofstream out(path);
  if (!out) throw DatasetError("cannot write " + path.string());
  write_records(out, instances);
  return path;
}

GroupedDataset load_dataset_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw DatasetError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  GroupedDataset ds;
  for (const auto& file : files) {
    const std::string stem = file.stem().string();
    const auto cut = stem.find('_');
    if (cut == std::string::npos) continue;
    DistributionKind kind;
    try {
      kind = parse_distribution_kind(stem.substr(0, cut));
    } catch (const ParameterError&) {
      continue;
    }
    std::ifstream in(file);
    if (!in) throw DatasetError("cannot read " + file.string());
    auto instances = read_records(in);
    if (instances.empty()) throw DatasetError("group file is empty: " + file.string());
    ds.groups.push_back({static_cast<int>(ds.groups.size()), kind, std::move(instances)});
  }
  if (ds.groups.empty()) throw DatasetError("no group files in " + dir.string());
  return ds;
}

}  // namespace droute
