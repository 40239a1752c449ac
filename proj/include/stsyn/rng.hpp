#pragma once

#include <cmath>
#include <cstdint>

namespace stsyn {

// splitmix64 finalizer; also used as the keyed hash for seed derivation.
constexpr uint64_t mix64(uint64_t z) noexcept {
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ull;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebull;
  z ^= z >> 31;
  return z;
}

inline constexpr uint64_t kSeedGamma = 0x9e3779b97f4a7c15ull;

// Purpose tags keep RNG streams for unrelated concerns independent even
// when they share a master seed.
enum class Stream : uint64_t {
  timing = 1,
  batch = 2,
  sampling = 3,
  partition = 4,
  init = 5,
  data = 6,
  mc_trial = 7,
  batch_replicate = 8,
  probe = 9,
};

// Keyed chain hash: master seed + purpose + up to four indices -> stream seed.
constexpr uint64_t derive_seed(uint64_t root, Stream purpose, uint64_t a = 0,
                               uint64_t b = 0, uint64_t c = 0,
                               uint64_t d = 0) noexcept {
  uint64_t h = mix64(root ^ 0x9d8a7b6c5d4e3f21ull);
  h = mix64(h ^ (static_cast<uint64_t>(purpose) + kSeedGamma));
  h = mix64(h ^ (a + kSeedGamma));
  h = mix64(h ^ (b + kSeedGamma));
  h = mix64(h ^ (c + kSeedGamma));
  h = mix64(h ^ (d + kSeedGamma));
  return h;
}

// Counter-based stream: output(i) = mix64(seed + i*gamma). Streams with equal
// seeds produce identical sequences; distinct derive_seed keys give
// independent streams without coordination.
class RngStream {
 public:
  explicit RngStream(uint64_t seed) noexcept : state_(seed) {}

  uint64_t next_u64() noexcept {
    state_ += kSeedGamma;
    return mix64(state_);
  }

  // Uniform on the open interval (0,1); never returns an endpoint.
  double next_unit() noexcept {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Exponential with the given mean; strictly positive.
  double next_exponential(double mean) noexcept {
    return -mean * std::log(next_unit());
  }

  // Unbiased integer in [0, bound) by rejection.
  uint64_t next_below(uint64_t bound) noexcept {
    const uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      const uint64_t r = next_u64();
      if (r >= threshold) return r % bound;
    }
  }

  // Standard normal via Box-Muller; the paired draw is cached.
  double next_gaussian() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = next_unit();
    const double u2 = next_unit();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * 3.14159265358979323846 * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace stsyn
