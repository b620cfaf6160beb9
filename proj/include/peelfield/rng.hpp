#pragma once

#include <cstdint>

namespace peelfield {

// Deterministic counter-based RNG.  splitmix64 is used both to mix stream
// identifiers into an initial state and to advance the stream itself, so a
// stream is fully determined by (seed, id words) and is independent of call
// order elsewhere.  Gaussian variates come from a hand-rolled Box-Muller
// transform: std::normal_distribution is implementation-defined, and studies
// must reproduce byte-identically across toolchains.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class RandomStream {
 public:
  // Builds the substream for (seed, a, b, c); defaults give a plain stream.
  explicit RandomStream(std::uint64_t seed, std::uint64_t a = 0,
                        std::uint64_t b = 0, std::uint64_t c = 0) {
    state_ = seed;
    (void)splitmix64(state_);
    state_ ^= a;
    (void)splitmix64(state_);
    state_ ^= b;
    (void)splitmix64(state_);
    state_ ^= c;
    (void)splitmix64(state_);
  }

  std::uint64_t next_u64() { return splitmix64(state_); }

  // Uniform in (0, 1]; never returns 0 so log() below is safe.
  double next_uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53 + 0x1.0p-54;
  }

  double next_normal();

  // Uniform direction on the unit sphere (Marsaglia rejection).
  void next_direction(double out[3]);

 private:
  std::uint64_t state_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace peelfield
