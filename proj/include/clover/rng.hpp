#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace clover {

// Seeded PRNG with platform-independent draws.
//
// The standard distributions are implementation-defined, so uniform, integer
// and normal variates are derived directly from the raw 64-bit engine output.
// `derive(stream)` yields an independent generator that depends only on the
// construction seed, not on how much of this generator has been consumed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t seed() const { return seed_; }
  Rng derive(std::uint64_t stream) const;

  std::uint64_t next_u64() { return engine_(); }
  // Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi);
  // Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound);
  double normal();

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace clover
