#pragma once
#include <cstdint>
#include <initializer_list>

namespace hdrtv {

// Counter-based RNG: a pure hash of (seed, stream, counters...). No mutable
// state, so draws are independent of evaluation order and safe to compute
// from parallel rows. Every random decision in the project is keyed this way.
namespace rng {

// Stream tags keep unrelated consumers of the same seed decorrelated.
enum Stream : std::uint64_t {
  synth_field = 1,
  synth_patch = 2,
  weight_init = 3,
  dropout = 4,
  patch_pos = 5,
  color_card = 6,
  bench = 7,
  dataset = 8,
  grad_probe = 9,
};

inline std::uint64_t mix(std::uint64_t x) {
  // splitmix64 finalizer
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ull;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBull;
  x ^= x >> 31;
  return x;
}

inline std::uint64_t hash(std::initializer_list<std::uint64_t> words) {
  std::uint64_t s = 0x9E3779B97F4A7C15ull;
  for (std::uint64_t w : words) s = mix(s + 0x9E3779B97F4A7C15ull + w);
  return mix(s);
}

// Uniform in [0, 1), 53-bit resolution.
inline double uniform(std::initializer_list<std::uint64_t> words) {
  return double(hash(words) >> 11) * 0x1.0p-53;
}

inline double uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t a,
                      std::uint64_t b = 0, std::uint64_t c = 0) {
  return uniform({seed, stream, a, b, c});
}

inline double range(double lo, double hi, std::uint64_t seed, std::uint64_t stream,
                    std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) {
  return lo + (hi - lo) * uniform(seed, stream, a, b, c);
}

// Integer in [0, n)
inline std::uint64_t index(std::uint64_t n, std::uint64_t seed, std::uint64_t stream,
                           std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) {
  return std::uint64_t(uniform(seed, stream, a, b, c) * double(n)) % n;
}

}  // namespace rng
}  // namespace hdrtv
