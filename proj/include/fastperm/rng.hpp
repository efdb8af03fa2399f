#pragma once

// Counter-based random number streams (Philox4x32-10).
//
// Salmon et al., "Parallel random numbers: as easy as 1, 2, 3", SC 2011.
//
// Every consumer of randomness in this library draws from a Stream keyed by
// (seed, stream_id). Streams are stateless functions of their key and a draw
// counter, so trial t's randomness never depends on how many trials ran
// before it or on which worker produced it.

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

namespace fastperm {

namespace detail {

constexpr uint32_t kPhiloxW32A = 0x9E3779B9u;
constexpr uint32_t kPhiloxW32B = 0xBB67AE85u;
constexpr uint32_t kPhiloxM4x32A = 0xD2511F53u;
constexpr uint32_t kPhiloxM4x32B = 0xCD9E8D57u;

inline void philox_round(std::array<uint32_t, 4>& ctr, uint32_t k0, uint32_t k1) {
  const uint64_t p0 = static_cast<uint64_t>(kPhiloxM4x32A) * ctr[0];
  const uint64_t p1 = static_cast<uint64_t>(kPhiloxM4x32B) * ctr[2];
  const uint32_t hi0 = static_cast<uint32_t>(p0 >> 32), lo0 = static_cast<uint32_t>(p0);
  const uint32_t hi1 = static_cast<uint32_t>(p1 >> 32), lo1 = static_cast<uint32_t>(p1);
  ctr = {hi1 ^ ctr[1] ^ k0, lo1, hi0 ^ ctr[3] ^ k1, lo0};
}

inline std::array<uint32_t, 4> philox4x32_10(std::array<uint32_t, 4> ctr, uint32_t k0,
                                             uint32_t k1) {
  for (int round = 0; round < 10; ++round) {
    philox_round(ctr, k0, k1);
    k0 += kPhiloxW32A;
    k1 += kPhiloxW32B;
  }
  return ctr;
}

}  // namespace detail

// One independent stream of the keyed generator. 2^64 streams per seed,
// 2^65 64-bit draws per stream.
class Stream {
 public:
  Stream(uint64_t seed, uint64_t stream_id) noexcept
      : key0_(static_cast<uint32_t>(seed)),
        key1_(static_cast<uint32_t>(seed >> 32)),
        stream_lo_(static_cast<uint32_t>(stream_id)),
        stream_hi_(static_cast<uint32_t>(stream_id >> 32)) {}

  uint64_t next_u64() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const std::array<uint32_t, 4> out =
        detail::philox4x32_10({static_cast<uint32_t>(counter_),
                               static_cast<uint32_t>(counter_ >> 32), stream_lo_, stream_hi_},
                              key0_, key1_);
    ++counter_;
    spare_ = (static_cast<uint64_t>(out[2]) << 32) | out[3];
    have_spare_ = true;
    return (static_cast<uint64_t>(out[0]) << 32) | out[1];
  }

  // Uniform on [0, 1), 53-bit resolution.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on {0, ..., bound-1}, bias rejected.
  uint64_t next_below(uint64_t bound) {
    const uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      const uint64_t x = next_u64();
      if (x >= threshold) return x % bound;
    }
  }

  // Standard normal via Box-Muller; pairs are cached.
  double next_normal() {
    if (have_normal_) {
      have_normal_ = false;
      return normal_spare_;
    }
    double u1 = next_double();
    while (u1 <= 0.0) u1 = next_double();
    const double u2 = next_double();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 6.283185307179586476925286766559 * u2;
    normal_spare_ = radius * std::sin(angle);
    have_normal_ = true;
    return radius * std::cos(angle);
  }

  // Fisher-Yates; uniform over all n! arrangements.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (size_t i = items.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(next_below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  uint32_t key0_, key1_;
  uint32_t stream_lo_, stream_hi_;
  uint64_t counter_ = 0;
  uint64_t spare_ = 0;
  bool have_spare_ = false;
  double normal_spare_ = 0.0;
  bool have_normal_ = false;
};

// Derives a sub-seed so that independent concerns (masks, residual noise,
// basis init) never share a stream even under equal user seeds.
inline uint64_t derive_seed(uint64_t seed, uint64_t salt) {
  Stream s(seed, ~salt);
  return s.next_u64();
}

}  // namespace fastperm
