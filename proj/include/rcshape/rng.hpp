#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace rcshape {

// splitmix64 step; used both as a mixing function and to derive
// independent per-replication seeds from a master seed.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t s = a;
  std::uint64_t h = splitmix64(s);
  s ^= b + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  return splitmix64(s);
}

// Seed for stream `i` derived from a master seed. Streams are
// order-independent, so replications can run in parallel and still
// produce identical results.
inline std::uint64_t stream_seed(std::uint64_t master, std::uint64_t i) {
  return mix(master, i + 1);
}

inline double to_unit_double(std::uint64_t x) {
  // 53 random bits into (0,1); never returns 0.
  return (static_cast<double>(x >> 11) + 0.5) * 0x1.0p-53;
}

// One standard normal deviate addressed by (key, counter). Evaluation is
// stateless, which lets a noise field be sampled lazily cell by cell in
// any order.
inline double counter_normal(std::uint64_t key, std::uint64_t counter) {
  std::uint64_t s = mix(key, counter);
  double u1 = to_unit_double(splitmix64(s));
  double u2 = to_unit_double(splitmix64(s));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

// Stateful engine used by the data generator.
using Engine = std::mt19937_64;

inline Engine make_engine(std::uint64_t seed) { return Engine(seed); }

}  // namespace rcshape
