#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace geoxplain {

// PCG32 (Melissa O'Neill's pcg32_oneseq). Fixed-width arithmetic keeps every
// stream reproducible across platforms and standard library versions, which
// std::uniform_*_distribution does not guarantee.
class Pcg32 {
 public:
  explicit Pcg32(std::uint64_t seed, std::uint64_t stream = 0x14057b7ef767814fULL) {
    state_ = 0;
    inc_ = (stream << 1u) | 1u;
    next_u32();
    state_ += seed;
    next_u32();
  }

  std::uint32_t next_u32() {
    std::uint64_t old = state_;
    state_ = old * 6364136223846793005ULL + inc_;
    std::uint32_t xorshifted = static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
    std::uint32_t rot = static_cast<std::uint32_t>(old >> 59u);
    return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
  }

  // Uniform in [0, bound). Debiased via rejection (Lemire-style threshold).
  std::uint32_t bounded(std::uint32_t bound) {
    if (bound <= 1) return 0;
    std::uint32_t threshold = (0u - bound) % bound;
    for (;;) {
      std::uint32_t r = next_u32();
      if (r >= threshold) return r % bound;
    }
  }

  // Uniform in [0, 1).
  double next_double() { return next_u32() * (1.0 / 4294967296.0); }
  float next_float() { return static_cast<float>(next_double()); }

  // Uniform in [lo, hi].
  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Standard normal via Box-Muller; second value cached.
  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    double u1, u2;
    do {
      u1 = next_double();
    } while (u1 <= 1e-12);
    u2 = next_double();
    double radius = std::sqrt(-2.0 * std::log(u1));
    double angle = 6.283185307179586476925286766559 * u2;
    cached_ = radius * std::sin(angle);
    has_cached_ = true;
    return radius * std::cos(angle);
  }

 private:
  std::uint64_t state_ = 0;
  std::uint64_t inc_ = 0;
  bool has_cached_ = false;
  double cached_ = 0.0;
};

// FNV-1a over raw bytes.
inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 14695981039346656037ULL) {
  std::uint64_t h = seed;
  for (unsigned char byte : bytes) {
    h ^= byte;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives the per-(image, repeat) seed used by the random-crop baseline from
// the run seed. Stable across platforms.
inline std::uint64_t derive_seed(std::uint64_t run_seed, std::string_view image_id,
                                 std::uint64_t repeat_index) {
  std::uint64_t h = fnv1a64(image_id);
  h = splitmix64(h ^ splitmix64(run_seed));
  return splitmix64(h ^ (repeat_index + 0x51ed270b66ae4f1dULL));
}

}  // namespace geoxplain
