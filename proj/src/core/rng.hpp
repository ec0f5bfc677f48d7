#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace pipofan {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t fnv1a64(const void* bytes, size_t n) {
  const auto* p = static_cast<const unsigned char*>(bytes);
  uint64_t h = 0xcbf29ce484222325ULL;
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline uint64_t fnv1a64(std::string_view s) { return fnv1a64(s.data(), s.size()); }

// PCG32 with an explicit serializable state. All randomness in the project
// flows through this type so runs are reproducible across platforms; the
// standard library engines are avoided because their distributions are not
// pinned by the standard.
class Rng {
 public:
  Rng() : Rng(0) {}

  explicit Rng(uint64_t seed, uint64_t stream = 0x14057b7ef767814fULL) {
    state_ = 0;
    inc_ = (stream << 1u) | 1u;
    next_u32();
    state_ += splitmix64(seed);
    next_u32();
  }

  // Independent stream derived from a seed and a purpose label, so separate
  // concerns (init, sampling, folds) never share a sequence.
  static Rng stream(uint64_t seed, std::string_view name) {
    uint64_t h = fnv1a64(name);
    return Rng(splitmix64(seed ^ h), h);
  }

  uint32_t next_u32() {
    uint64_t old = state_;
    state_ = old * 6364136223846793005ULL + inc_;
    uint32_t xorshifted = static_cast<uint32_t>(((old >> 18u) ^ old) >> 27u);
    uint32_t rot = static_cast<uint32_t>(old >> 59u);
    return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
  }

  uint64_t next_u64() {
    uint64_t hi = next_u32();
    return (hi << 32) | next_u32();
  }

  // Unbiased integer in [0, bound) by rejection.
  uint32_t below(uint32_t bound) {
    if (bound <= 1) return 0;
    uint32_t threshold = (-bound) % bound;
    for (;;) {
      uint32_t r = next_u32();
      if (r >= threshold) return r % bound;
    }
  }

  int64_t uniform_int(int64_t lo, int64_t hi_inclusive) {
    return lo + static_cast<int64_t>(below(static_cast<uint32_t>(hi_inclusive - lo + 1)));
  }

  double next_double() {  // [0, 1)
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Box-Muller. The sine branch is discarded to keep the state a pure
  // function of the call count, which keeps serialization trivial.
  double normal() {
    double u1 = 1.0 - next_double();  // (0, 1]
    double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  template <class It>
  void shuffle(It first, It last) {
    auto n = static_cast<int64_t>(last - first);
    for (int64_t i = n - 1; i > 0; --i) {
      int64_t j = static_cast<int64_t>(below(static_cast<uint32_t>(i + 1)));
      std::swap(first[i], first[j]);
    }
  }

  uint64_t state() const { return state_; }
  uint64_t inc() const { return inc_; }
  void restore(uint64_t state, uint64_t inc) {
    state_ = state;
    inc_ = inc;
  }

 private:
  uint64_t state_ = 0;
  uint64_t inc_ = 0;
};

}  // namespace pipofan
