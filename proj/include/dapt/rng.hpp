#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace dapt {

// splitmix64 step; used to derive independent seed streams.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Deterministic RNG. mt19937_64 is bit-exact across platforms; the
// distributions below are hand-rolled so sampled values are too.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // [0,1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  // inclusive bounds, bias-free rejection sampling
  int uniform_int(int lo, int hi) {
    std::uint64_t range = static_cast<std::uint64_t>(hi) - lo + 1;
    std::uint64_t limit = ~0ULL - (~0ULL % range + 1) % range;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x > limit);
    return lo + static_cast<int>(x % range);
  }

  // Box-Muller; the second variate is discarded to keep state simple.
  double normal(double mu = 0.0, double sigma = 1.0);

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(uniform_int(0, static_cast<int>(i) - 1));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Independent stream derived from the construction seed, not current state.
  Rng fork(std::uint64_t stream) const { return Rng(mix_seed(seed_, stream)); }

 private:
  std::uint64_t seed_;
  std::mt19937_64 gen_;
};

}  // namespace dapt
