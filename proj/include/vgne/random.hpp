#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "vgne/game.hpp"

namespace vgne {

/// Seeded generator with platform-independent real and integer draws.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1) with 53 random bits.
  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t r;
    do {
      r = engine_();
    } while (r >= limit);
    return r % bound;
  }

  Index integer(Index lo, Index hi) { return lo + static_cast<Index>(below(static_cast<std::uint64_t>(hi - lo + 1))); }

  Vectord uniform_vector(Index size, double lo, double hi) {
    Vectord v(size);
    for (Index j = 0; j < size; ++j) v[j] = uniform(lo, hi);
    return v;
  }

  /// Uniform point in a bounded box.
  Vectord in_box(const BoxSetd& box) {
    Vectord v(box.dim());
    for (Index j = 0; j < box.dim(); ++j) v[j] = uniform(box.lower()[j], box.upper()[j]);
    return v;
  }

  /// Standard normal via Box-Muller.
  double normal() {
    double u1 = unit();
    while (u1 <= 0.0) u1 = unit();
    const double u2 = unit();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace vgne
