#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <string_view>

namespace ti {

/// Seeded random stream with portable uniform/normal conversion.
///
/// std::uniform_real_distribution and std::normal_distribution are
/// implementation-defined, so draws are converted from raw mt19937_64 words
/// by hand. Identical seeds give identical byte streams on every platform,
/// which the dataset/checkpoint reproducibility contract depends on.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random mantissa bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller (no cached spare, for reproducibility
  /// independent of call grouping).
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  /// Integer uniform on [0, n).
  std::uint64_t below(std::uint64_t n) {
    // Rejection-free modulo is biased for huge n; all uses here have n << 2^64
    // so multiply-shift is exact enough and strictly in range.
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n;
  }

  /// Engine state as text, for bit-exact training resumption.
  std::string state() const {
    std::ostringstream os;
    os << engine_;
    return os.str();
  }
  void set_state(const std::string& s) {
    std::istringstream is(s);
    is >> engine_;
  }

 private:
  std::mt19937_64 engine_;
};

/// Derives the seed for a named substream (dataset, init, batching, trials, ...)
/// from one global seed. FNV-1a over the name, mixed with the base seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view stream) {
  std::uint64_t h = 1469598103934665603ull;
  for (char c : stream) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 1099511628211ull;
  }
  // splitmix64 finalizer on the combination
  std::uint64_t z = base + 0x9e3779b97f4a7c15ull * h;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

/// Per-sample stream inside a substream (embarrassingly parallel generation).
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view stream, std::uint64_t index) {
  return derive_seed(derive_seed(base, stream) ^ (0x51'7c'c1'b7'27'22'0a'95ull * (index + 1)), stream);
}

}  // namespace ti
