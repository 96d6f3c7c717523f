#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>

namespace structgen {

// Seeded generator whose derived draws do not depend on the standard
// library's distribution implementations, so shuffles and initial weights
// are reproducible across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, n). n must be > 0.
  std::size_t uniform_index(std::size_t n) { return static_cast<std::size_t>(next() % n); }

  // Uniform in [lo, hi) with 53 random bits.
  double uniform(double lo, double hi) {
    const double u = static_cast<double>(next() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
  }

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[uniform_index(i)]);
    }
  }

  std::string state() const;
  void restore(const std::string& state);

 private:
  std::mt19937_64 engine_;
};

// Mixes two integers into an independent seed (splitmix64 finaliser).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt);

}  // namespace structgen
