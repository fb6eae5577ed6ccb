#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace droute {

// Seedable, splittable random source with platform-independent output.
//
// The engine is std::mt19937_64, whose output sequence is fixed by the C++
// standard. The standard <random> distributions are implementation-defined,
// so every distribution used by the library is derived here from raw 64-bit
// draws:
//   uniform()      53 high bits scaled to [0, 1)
//   uniform_int    Lemire's multiply-shift with rejection
//   normal()       Box-Muller (cosine branch only, one draw pair per call)
//   exponential()  inverse CDF, -mean * log(1 - u)
// Child streams come from split(stream), which hashes (seed, stream) through
// SplitMix64; a child never shares state with its parent.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64();
  double uniform();
  double uniform(double lo, double hi);
  // Uniform integer in [lo, hi], inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  double normal(double mean, double stddev);
  double exponential(double mean);

  Rng split(std::uint64_t stream) const;
  Rng split(std::string_view label) const;

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;
// Order-dependent combination of two 64-bit values.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

}  // namespace droute
