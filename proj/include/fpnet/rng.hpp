#ifndef FPNET_RNG_HPP
#define FPNET_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "fpnet/common.hpp"

namespace fpnet {

/// Mixes a seed with salt values (SplitMix64 finalizer). Used to derive
/// independent stream seeds for e.g. per-packet or per-layer generators so
/// that parallel producers never share a generator.
inline uint64_t mix_seed(uint64_t seed) {
  uint64_t z = seed + 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline uint64_t derive_seed(uint64_t base, uint64_t salt) {
  return mix_seed(base ^ mix_seed(salt));
}

inline uint64_t derive_seed(uint64_t base, uint64_t salt_a, uint64_t salt_b) {
  return derive_seed(derive_seed(base, salt_a), salt_b);
}

/// Deterministic random source. Wraps std::mt19937_64 (whose output sequence
/// is pinned by the standard) and implements all value transforms in-house,
/// because the std distribution templates are not bit-stable across library
/// implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(mix_seed(seed)) {}

  uint64_t next_u64() { return gen_(); }

  /// Uniform double in [0, 1) with 53-bit resolution.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Precondition n > 0.
  uint64_t uniform_int(uint64_t n) {
    if (n == 0) throw Error("Rng::uniform_int: n must be positive");
    // Rejection sampling keeps the draw unbiased for any n.
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  /// Standard normal via Box-Muller. Caches the second deviate.
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    if (u1 < 0x1.0p-60) u1 = 0x1.0p-60;  // keep log() finite
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(kTwoPi * u2);
    have_spare_ = true;
    return r * std::cos(kTwoPi * u2);
  }

  /// Circularly symmetric complex normal CN(0, 1): unit total variance.
  cplx cgaussian() {
    const double re = gaussian();
    const double im = gaussian();
    return cplx(re * M_SQRT1_2, im * M_SQRT1_2);
  }

  /// Fisher-Yates shuffle; depends only on the generator state, not on the
  /// element type, so index shuffles reproduce across builds.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace fpnet

#endif  // FPNET_RNG_HPP
