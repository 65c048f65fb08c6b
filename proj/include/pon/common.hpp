#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace pon {

// Execution policy for the batch kernels. Serial is the reference
// implementation; parallel runs the same per-item code under OpenMP and
// reduces in fixed item order, so both produce bitwise-identical results.
enum class Exec { serial, parallel };

int max_threads();

// splitmix64-style mix; derives an independent per-item seed from a master
// seed so items can be processed in any order (or in parallel).
inline std::uint64_t mix_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t fnv1a64(const void* data, std::size_t len,
                      std::uint64_t seed = 1469598103934665603ULL);
std::uint64_t fnv1a64(const std::string& s);

// Shortest decimal form that round-trips the exact double value.
std::string format_double(double v);
std::string hex64(std::uint64_t v);

}  // namespace pon
