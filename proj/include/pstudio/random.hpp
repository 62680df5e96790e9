#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <random>

namespace pstudio {

// std::mt19937_64's output sequence is fixed by the standard, but the
// std::*_distribution adaptors are not; these conversions keep seeded runs
// reproducible across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform in [0, n) by rejection; n must be positive.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v;
    do v = engine_();
    while (v >= limit);
    return v % n;
  }

  template <class It>
  void shuffle(It first, It last) {
    const auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) std::iter_swap(first + (i - 1), first + static_cast<std::ptrdiff_t>(below(i)));
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace pstudio
