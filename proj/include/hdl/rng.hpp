#pragma once

// Deterministic RNG used by all stochastic search seeds. std::mt19937_64 has
// a guaranteed algorithm, so results are identical across platforms as long
// as we only draw through the helpers below (distribution classes are NOT
// portable and must not be used).

#include <cstdint>
#include <random>

namespace hdl {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  // Uniform in [0, 1).
  double uniform() {
    // 53 random bits, exact double.
    return (eng_() >> 11) * 0x1.0p-53;
  }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  std::uint64_t bits() { return eng_(); }

  std::uint64_t below(std::uint64_t n) { return eng_() % n; }

 private:
  std::mt19937_64 eng_;
};

}  // namespace hdl
