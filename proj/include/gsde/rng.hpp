#pragma once

// Counter-based stream derivation plus hand-rolled distributions.
//
// std::mt19937_64 is bit-exact by the C++ standard, but the standard
// distributions are implementation-defined, so every transform from raw
// 64-bit draws to doubles lives here. That makes realizations reproducible
// bit-for-bit for a given (master_seed, stream_index) pair.

#include <cmath>
#include <cstdint>
#include <random>

namespace gsde::rng {

/// SplitMix64 finalizer; good avalanche for seed derivation.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Pure function of (master_seed, stream_index); distinct streams decorrelate.
inline std::mt19937_64 make_stream(std::uint64_t master_seed, std::uint64_t stream_index) {
  std::uint64_t s = splitmix64(master_seed ^ splitmix64(stream_index * 0x9E3779B97F4A7C15ULL + 1));
  return std::mt19937_64(s);
}

/// Uniform double in [0, 1) using the top 53 bits of one draw.
inline double uniform01(std::mt19937_64& g) {
  return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

/// Standard normal via Box-Muller; consumes exactly two draws.
inline double normal(std::mt19937_64& g) {
  double u1 = 1.0 - uniform01(g);  // (0, 1], keeps log finite
  double u2 = uniform01(g);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

/// Exponential with rate lambda > 0 by inversion.
inline double exponential(std::mt19937_64& g, double lambda) {
  return -std::log(1.0 - uniform01(g)) / lambda;
}

}  // namespace gsde::rng
