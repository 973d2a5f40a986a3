#pragma once

#include <bit>
#include <cmath>
#include <cstdint>

#include "ohm/errors.hpp"

namespace ohm::rng {

// Counter-based deterministic randomness: every draw is a pure function of
// (master seed, structural key, counter). Structural keys are point indices
// or canonical unordered edge coordinates, so the same quantity is sampled
// identically regardless of evaluation order or thread count.

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// splitmix64 finalizer
inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z += kGolden;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Domain-separation tags for independent random fields under one seed.
enum class Tag : std::uint64_t {
  PointCount = 0x10,
  PointCoord = 0x11,
  EnergyMark = 0x12,
  EdgeField = 0x13,
};

// Accumulated hash of a structural key. Cheap value type.
class Key {
 public:
  explicit Key(std::uint64_t seed) : h_(mix64(seed ^ 0x6f68'6d6eULL)) {}

  Key& absorb(std::uint64_t w) {
    h_ = mix64(h_ ^ mix64(w));
    return *this;
  }
  Key& absorb(Tag t) { return absorb(static_cast<std::uint64_t>(t)); }
  Key& absorb(std::int64_t w) { return absorb(static_cast<std::uint64_t>(w)); }

  // Canonicalizes -0.0 so coordinate hashing is sign-of-zero insensitive.
  Key& absorb(double v) {
    if (v == 0.0) v = 0.0;
    return absorb(std::bit_cast<std::uint64_t>(v));
  }

  std::uint64_t bits(std::uint64_t counter) const {
    return mix64(h_ ^ mix64(counter ^ kGolden));
  }
  double uniform(std::uint64_t counter) const {  // [0,1)
    return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
  }

 private:
  std::uint64_t h_;
};

// Sequential draws against a fixed key.
class Stream {
 public:
  explicit Stream(Key key) : key_(key) {}

  std::uint64_t next_bits() { return key_.bits(ctr_++); }
  double next_uniform() { return static_cast<double>(next_bits() >> 11) * 0x1.0p-53; }
  // (0,1], safe under log()
  double next_uniform_pos() {
    return (static_cast<double>(next_bits() >> 11) + 1.0) * 0x1.0p-53;
  }

  // Exact Poisson by exponential gaps; large rates split into independent
  // halves so no chunk underflows or runs long.
  std::int64_t next_poisson(double lambda) {
    if (!(lambda >= 0.0)) throw ParameterError("poisson rate must be nonnegative");
    std::int64_t n = 0;
    while (lambda > 512.0) {
      n += poisson_small_(lambda / 2.0);
      lambda -= lambda / 2.0;
    }
    return n + poisson_small_(lambda);
  }

 private:
  std::int64_t poisson_small_(double lambda) {
    std::int64_t n = -1;
    double t = 0.0;
    while (t <= lambda) {
      t += -std::log(next_uniform_pos());
      ++n;
    }
    return n;
  }

  Key key_;
  std::uint64_t ctr_ = 0;
};

}  // namespace ohm::rng
