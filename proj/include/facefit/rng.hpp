#pragma once

#include "facefit/types.hpp"

#include <cmath>
#include <string_view>

namespace facefit {

// Splittable deterministic generator. All randomness in the project flows
// from one root seed through named streams, so parallel call sites stay
// reproducible regardless of evaluation order.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), state_(seed ^ 0x9e3779b97f4a7c15ull) {
    next_u64();
  }

  std::uint64_t next_u64() {
    // splitmix64
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  Real uniform() { return static_cast<Real>(next_u64() >> 11) * 0x1.0p-53; }

  Real uniform(Real lo, Real hi) { return lo + (hi - lo) * uniform(); }

  int uniform_int(int lo, int hi) {  // inclusive bounds
    return lo + static_cast<int>(next_u64() % static_cast<std::uint64_t>(hi - lo + 1));
  }

  // Box-Muller; both uniforms drawn even though one sample is returned,
  // keeping the stream advance independent of call parity.
  Real normal() {
    Real u1 = uniform();
    Real u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }

  Real normal(Real mean, Real stddev) { return mean + stddev * normal(); }

  // Derive an independent stream from a name; derivation depends only on
  // this generator's seed and the name, not on how much it was used.
  Rng stream(std::string_view name) const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (char c : name) {
      h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
      h *= 0x100000001b3ull;
    }
    h ^= seed_ + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    return Rng(h);
  }

  Rng stream(std::string_view name, std::uint64_t index) const {
    return stream(std::string(name) + "/" + std::to_string(index));
  }

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::uint64_t state_;
};

// FNV-1a over raw bytes; used for provenance hashes.
inline std::uint64_t fnv1a(const void* data, std::size_t size,
                           std::uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ull) {
  return fnv1a(s.data(), s.size(), h);
}

std::string hex64(std::uint64_t v);

}  // namespace facefit
