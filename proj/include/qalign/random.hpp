#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace qalign {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_string(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  return splitmix64(a ^ splitmix64(b + 0x632BE59BD9B4E019ULL));
}

inline std::uint64_t mix_seed(std::uint64_t a, std::string_view b) { return mix_seed(a, hash_string(b)); }

/// Uniform double in [0, 1) with 53 random bits; independent of the standard library's
/// distribution implementations so streams are reproducible everywhere.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Uniform integer in [0, n).
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  __extension__ using u128 = unsigned __int128;  // multiply-shift, no modulo bias worth noting
  return static_cast<std::size_t>((static_cast<u128>(rng()) * n) >> 64);
}

/// Draws an index from an (approximately) normalized probability vector.
inline std::size_t sample_categorical(Rng& rng, std::span<const double> probs) {
  double u = uniform01(rng);
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  // Rounding slack: fall back to the last index with positive mass.
  for (std::size_t i = probs.size(); i-- > 0;) {
    if (probs[i] > 0.0) return i;
  }
  return probs.size() - 1;
}

}  // namespace qalign
