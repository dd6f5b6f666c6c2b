#pragma once

#include <cstdint>
#include <random>

namespace gamaudit {

// Seeded generator used for every random draw in the project. Distributions
// are implemented here rather than through <random> adaptors so that streams
// are identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform on [0, 1).
  double uniform();
  // Uniform integer on [0, n).
  std::uint64_t below(std::uint64_t n);
  // Uniform integer on [lo, hi].
  std::int64_t between(std::int64_t lo, std::int64_t hi);
  double normal();
  bool bernoulli(double p) { return uniform() < p; }

  template <typename It>
  void shuffle(It first, It last) {
    const auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
      const auto j = below(i);
      std::swap(first[i - 1], first[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace gamaudit
