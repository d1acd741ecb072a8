#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace gnnpf {

using NodeId = std::uint32_t;
using PartitionId = std::uint32_t;
using Seed = std::uint64_t;

/// SplitMix64 finalizer. Used for hash partitioning and for deriving
/// independent seeds from (base, stream...) tuples.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr Seed derive_seed(Seed base, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) noexcept {
  return mix64(mix64(mix64(base ^ 0x5851f42d4c957f2dULL) ^ a) ^ (b * 0x2545f4914f6cdd1dULL)) ^ mix64(c + 1);
}

/// Seeded stream on top of mt19937_64. The std distributions are
/// implementation-defined, so bounded draws and shuffles are done here to
/// keep results identical across standard libraries.
class Rng {
 public:
  explicit Rng(Seed seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      const std::uint64_t r = engine_();
      if (r >= threshold) return r % bound;
    }
  }

  /// Uniform double in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    shuffle(std::span<T>(items));
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace gnnpf
