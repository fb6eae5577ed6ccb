#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "droute/policy.hpp"
#include "droute/tensor.hpp"

namespace droute {

// Binary checkpoint layout, all integers little-endian:
//   "DROROUTE1"                        9-byte magic
//   u64 entry count
//   per entry: u64 name length, name bytes, u64 rank, rank x u64 dims
//   payload: every entry's values as f64, in manifest order
inline constexpr std::string_view kCheckpointMagic = "DROROUTE1";

struct NamedTensor {
  std::string name;
  nn::Tensor value;
};

void write_checkpoint(std::ostream& out, const std::vector<NamedTensor>& entries);
// Throws ParseError on a bad magic string or truncated data.
std::vector<NamedTensor> read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& entries);
std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path);

// Policy tensors plus a "policy.config" entry describing the architecture.
std::vector<NamedTensor> policy_entries(const PolicyParams& params);
// Rebuilds params from checkpoint entries; throws ShapeError when a tensor
// is missing or its shape disagrees with the stored architecture.
PolicyParams policy_from_entries(const std::vector<NamedTensor>& entries);

void save_policy(const std::filesystem::path& path, const PolicyParams& params);
PolicyParams load_policy(const std::filesystem::path& path);

const NamedTensor* find_entry(const std::vector<NamedTensor>& entries, std::string_view name) noexcept;

}  // namespace droute
