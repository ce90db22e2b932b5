#pragma once

#include <cstdint>
#include <random>

// Seed derivation for per-entity random streams. Each entity gets its own
// engine keyed by (seed, stream kind, entity id), so draws do not depend on
// iteration order or thread count.

namespace dpf {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

enum class Stream : std::uint64_t {
  UserFactors = 1,
  ItemFactors = 2,
  Observations = 3,
  VariationalInit = 4,
};

inline std::mt19937_64 make_engine(std::uint64_t seed, Stream kind,
                                   std::uint64_t entity) {
  const std::uint64_t a = splitmix64(seed ^ 0x2545f4914f6cdd1dULL);
  const std::uint64_t b = splitmix64(a ^ static_cast<std::uint64_t>(kind));
  return std::mt19937_64(splitmix64(b ^ entity));
}

}  // namespace dpf
