#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "droute/instance.hpp"

namespace droute {

// Line-oriented instance records. Each record is a header line
//   TSP <n>            followed by n lines "x y"
//   CVRP <n> <D>       followed by n + 1 lines "x y demand", depot first
// with coordinates printed to 17 significant digits so they read back exactly.
void write_record(std::ostream& out, const AnyInstance& inst);
void write_records(std::ostream& out, std::span<const AnyInstance> instances);
// Throws ParseError on malformed input.
std::vector<AnyInstance> read_records(std::istream& in);

// "<kind>_<n>_<seed>.txt"
std::string group_file_name(DistributionKind kind, std::size_t n, std::uint64_t seed);

std::filesystem::path save_group_file(const std::filesystem::path& dir, const GroupSpec& spec,
                                      std::span<const AnyInstance> instances);

// Loads every "<kind>_<n>_<seed>.txt" in `dir` as one group; groups are
// ordered by file name. Throws DatasetError when nothing usable is found.
GroupedDataset load_dataset_dir(const std::filesystem::path& dir);

}  // namespace droute
