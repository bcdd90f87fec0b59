#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "emloc/types.hpp"

namespace emloc {

// splitmix64 step; used to derive independent stream seeds from (base, ids).
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t trial = 0) {
  std::uint64_t s = base;
  std::uint64_t a = splitmix64(s);
  s ^= stream * 0x9e3779b97f4a7c15ULL + a;
  std::uint64_t b = splitmix64(s);
  s ^= trial * 0xd1342543de82ef95ULL + b;
  return splitmix64(s);
}

// mt19937_64 with hand-rolled output transforms so that draws are
// bit-identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed), seed_(seed) {}

  std::uint64_t seed_used() const { return seed_; }

  // uniform in [0, 1) with 53-bit resolution
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  std::uint64_t bits() { return engine_(); }

  // standard normal via Box-Muller (pairs not cached; see normal_pair)
  double normal() {
    auto [a, b] = normal_pair();
    (void)b;
    return a;
  }

  std::pair<double, double> normal_pair() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double th = 2.0 * M_PI * u2;
    return {r * std::cos(th), r * std::sin(th)};
  }

  // CN(0, var): real/imag each N(0, var/2)
  cdouble complex_normal(double var = 1.0) {
    auto [a, b] = normal_pair();
    const double s = std::sqrt(var / 2.0);
    return {s * a, s * b};
  }

  // unit-modulus QPSK symbol, (+-1 +-j)/sqrt(2)
  cdouble qpsk() {
    const std::uint64_t w = engine_();
    const double s = M_SQRT1_2;
    return {(w & 1) ? s : -s, (w & 2) ? s : -s};
  }

 private:
  std::mt19937_64 engine_;
  std::uint64_t seed_ = 0;
};

}  // namespace emloc
