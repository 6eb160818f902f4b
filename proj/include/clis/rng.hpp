#pragma once

#include <cstdint>
#include <string_view>

namespace clis {

// FNV-1a, used for stable sub-seed derivation and cassette request hashes.
// The streams written by this project (manifests, cassettes, sampled lists)
// must be reproducible across compilers, so no std:: distributions here.
inline std::uint64_t fnv1a64(std::string_view bytes,
                             std::uint64_t seed = 0xcbf29ce484222325ull) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

// SplitMix64: tiny, well-distributed, fully specified.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform in [0, n). Lemire's multiply-shift with rejection.
  std::uint64_t next_below(std::uint64_t n) {
    if (n == 0) return 0;
    while (true) {
      std::uint64_t x = next();
      __uint128_t m = static_cast<__uint128_t>(x) * n;
      std::uint64_t low = static_cast<std::uint64_t>(m);
      if (low >= n || low >= static_cast<std::uint64_t>(-n) % n) {
        return static_cast<std::uint64_t>(m >> 64);
      }
    }
  }

  // Uniform integer in [lo, hi] inclusive.
  std::int64_t next_in(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(
                    next_below(static_cast<std::uint64_t>(hi - lo + 1)));
  }

 private:
  std::uint64_t state_;
};

// Every random decision in a run flows from one root seed; sub-streams are
// named so that record/replay reproduces them exactly.
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view label) {
  char root_bytes[8];
  for (int i = 0; i < 8; ++i) {
    root_bytes[i] = static_cast<char>((root >> (8 * i)) & 0xff);
  }
  return fnv1a64(label, fnv1a64(std::string_view(root_bytes, 8)));
}

}  // namespace clis
