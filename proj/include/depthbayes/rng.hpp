#ifndef DEPTHBAYES_RNG_HPP
#define DEPTHBAYES_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>

#include "depthbayes/tensor.hpp"

namespace depthbayes {

using Rng = std::mt19937_64;

// Independent generator for (seed, stream). Distinct stream ids give
// reproducible draws regardless of the order in which streams are consumed.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    0x6a09e667u};
  return Rng(seq);
}

// splitmix64 finalizer; a bijection on 64-bit words.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline Tensor gaussian(Shape shape, double stddev, Rng& rng) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& v : t.values()) v = stddev * normal(rng);
  return t;
}

inline Tensor uniform(Shape shape, double lo, double hi, Rng& rng) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> dist(lo, hi);
  for (auto& v : t.values()) v = dist(rng);
  return t;
}

inline double glorot_stddev(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(2.0 / static_cast<double>(fan_in + fan_out));
}

}  // namespace depthbayes

#endif  // DEPTHBAYES_RNG_HPP
