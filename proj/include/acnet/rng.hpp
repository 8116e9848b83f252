#pragma once

#include <cmath>
#include <cstdint>
#include <utility>

#include <random>

namespace acnet {

// Deterministic random stream. mt19937_64 is bit-exact across platforms;
// the value transformations live here instead of <random> distributions,
// whose output is implementation-defined.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t raw() { return engine_(); }

  // [0, 1)
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0, n)
  int uniform_int(int n) {
    return static_cast<int>(engine_() % static_cast<uint64_t>(n));
  }

  // Standard normal, Box-Muller with a cached spare.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  template <typename Container>
  void shuffle(Container& c) {
    const int n = static_cast<int>(c.size());
    for (int i = n - 1; i > 0; --i) {
      const int j = uniform_int(i + 1);
      std::swap(c[i], c[j]);
    }
  }

  // splitmix64 finalizer, used to derive independent child seeds.
  static uint64_t mix(uint64_t a, uint64_t b) {
    uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  static Rng fork(uint64_t seed, uint64_t tag) { return Rng(mix(seed, tag)); }
  static Rng fork(uint64_t seed, uint64_t tag1, uint64_t tag2) {
    return Rng(mix(mix(seed, tag1), tag2));
  }
  static Rng fork(uint64_t seed, uint64_t tag1, uint64_t tag2, uint64_t tag3) {
    return Rng(mix(mix(mix(seed, tag1), tag2), tag3));
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace acnet
