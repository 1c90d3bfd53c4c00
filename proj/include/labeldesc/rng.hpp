// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace labeldesc {

// Seeded generator with draws defined here rather than through
// std::*_distribution, whose output is implementation-specific. Fits and
// simulations are therefore reproducible across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on (0, 1].
  double uniform() { return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  bool bernoulli(double p) { return uniform() <= p; }

  /// Index in [0, n).
  std::size_t index(std::size_t n) {
    auto k = static_cast<std::size_t>((uniform() - 0x1.0p-53) * static_cast<double>(n));
    return k < n ? k : n - 1;
  }

  /// Inverse-CDF draw from a probability vector.
  std::size_t categorical(std::span<const double> probs) {
    const double u = uniform();
    double acc = 0.0;
    for (std::size_t k = 0; k < probs.size(); ++k) {
      acc += probs[k];
      if (u <= acc) return k;
    }
    // Rounding left the cumulative sum just below 1; fall back to the last
    // class with positive mass.
    for (std::size_t k = probs.size(); k-- > 0;)
      if (probs[k] > 0.0) return k;
    return probs.size() - 1;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace labeldesc
