#ifndef SLP_RNG_HPP
#define SLP_RNG_HPP

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace slp {

/// Seeded PRNG for deterministic Monte Carlo runs.
///
/// Normal variates are produced by Box-Muller on top of mt19937_64 rather
/// than std::normal_distribution, whose output is not pinned by the standard
/// and differs between library implementations. Identical seeds therefore
/// give bit-identical streams on every platform we build on.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  /// Uniform integer in [0, n).
  int uniform_int(int n) {
    return static_cast<int>(engine_() % static_cast<std::uint64_t>(n));
  }

  /// Standard normal N(0, 1).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  /// Circularly symmetric complex normal CN(0, 1).
  std::complex<double> cnormal() {
    return {normal() * M_SQRT1_2, normal() * M_SQRT1_2};
  }

  Eigen::VectorXcd cnormal_vector(Eigen::Index n) {
    Eigen::VectorXcd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = cnormal();
    return v;
  }

  /// Stateless seed derivation (splitmix64 over mixed words), used to hand
  /// independent streams to grid points, slots, and mask epochs.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t a,
                              std::uint64_t b = 0, std::uint64_t c = 0) {
    std::uint64_t z = seed;
    for (std::uint64_t w : {a, b, c}) {
      z += 0x9e3779b97f4a7c15ULL + w;
      z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
      z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
      z = z ^ (z >> 31);
    }
    return z;
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace slp

#endif  // SLP_RNG_HPP
