#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace pmd {

// Mixes labels into a base seed (splitmix64 finalizer per label) so that
// unrelated consumers of one run seed get statistically independent streams.
// Identical (base, labels) always yields the identical derived seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a,
                          std::uint64_t b = 0, std::uint64_t c = 0);

// Deterministic random source. All distribution shaping (uniform doubles,
// bounded indices, shuffles) is implemented here on top of raw mt19937_64
// output; std::*_distribution is avoided because its draw sequences are not
// pinned by the standard.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform in [0, n), unbiased via rejection. n must be positive.
  std::size_t index(std::size_t n);

  // Fisher-Yates; unbiased given index() is.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i)
      std::swap(v[i - 1], v[index(i)]);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace pmd
