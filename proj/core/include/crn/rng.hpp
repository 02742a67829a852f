#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace crn {

// SplitMix64 step (Vigna, public domain). Used for seeding and for hashing
// stream tags into independent substreams.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Derives a substream id from a master seed and up to three tag values
// (purpose, record index, lane). Same inputs give the same id everywhere.
inline std::uint64_t derive_stream(std::uint64_t master, std::uint64_t a,
                                   std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t s = master;
  s ^= splitmix64(s) + 0x632BE59BD9B4E019ull * (a + 1);
  s ^= splitmix64(s) + 0x9E3779B97F4A7C15ull * (b + 1);
  s ^= splitmix64(s) + 0xC2B2AE3D27D4EB4Full * (c + 1);
  return splitmix64(s);
}

// xoshiro256++ (Blackman/Vigna, public domain) with explicit stream seeding.
// All draws go through fixed integer-to-double conversions so sequences are
// bit-identical across platforms; that property is load-bearing for the
// reproducibility guarantees of the experiment harness.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) {
    std::uint64_t s = derive_stream(seed, 0x5eedull, stream);
    for (auto& w : s_) w = splitmix64(s);
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Inverse-transform exponential; rate <= 0 is treated as "never fires".
  double exponential(double rate) {
    if (!(rate > 0.0)) return std::numeric_limits<double>::infinity();
    return -std::log1p(-uniform01()) / rate;
  }

  bool bernoulli(double p) { return uniform01() < p; }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::uint64_t s_[4];
};

}  // namespace crn
