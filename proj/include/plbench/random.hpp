#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <utility>

namespace plbench {

/// Seeded random source. The engine is std::mt19937_64, whose output sequence is
/// fixed by the C++ standard; the distributions are implemented here rather than
/// taken from <random>, whose algorithms vary between standard libraries.
///
/// Move-only: a source has exactly one owner and is handed off, never shared.
class RandomSource {
 public:
  explicit RandomSource(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  RandomSource(const RandomSource&) = delete;
  RandomSource& operator=(const RandomSource&) = delete;
  RandomSource(RandomSource&&) noexcept = default;
  RandomSource& operator=(RandomSource&&) noexcept = default;

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller; the second variate is cached.
  double normal();

  /// Uniform integer in [0, n), unbiased.
  std::size_t uniform_index(std::size_t n);

  template <class T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[uniform_index(i)]);
    }
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::optional<double> spare_normal_;
};

/// Deterministic child seed for an independent stream tagged `stream` (splitmix64 mix).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace plbench
