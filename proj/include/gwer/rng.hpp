#pragma once

#include <cmath>
#include <cstdint>

namespace gwer {

// Counter-based splittable generator. A stream is an arithmetic counter walk
// through the SplitMix64 mixer; (seed, stream_id) fully determines the
// sequence and stream i is derivable in O(1), independent of how replicas
// are scheduled across threads.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id)
      : state_(mix(seed + kGamma * mix(stream_id + 0x1ULL)) ^
               mix(stream_id ^ 0xda942042e4dd58b5ULL)),
        seed_(seed),
        stream_(stream_id) {}

  std::uint64_t next_u64() {
    state_ += kGamma;
    return mix(state_);
  }

  // [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // (0, 1]
  double uniform_pos() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  double exponential(double rate) { return -std::log(uniform_pos()) / rate; }

  // Box-Muller; two uniforms per variate.
  double normal() {
    double u1 = uniform_pos();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  // Unbiased integer in [0, n); n >= 1.
  std::uint64_t below(std::uint64_t n) {
    // Lemire rejection
    std::uint64_t x = next_u64();
    __uint128_t m = static_cast<__uint128_t>(x) * n;
    std::uint64_t lo = static_cast<std::uint64_t>(m);
    if (lo < n) {
      std::uint64_t t = (-n) % n;
      while (lo < t) {
        x = next_u64();
        m = static_cast<__uint128_t>(x) * n;
        lo = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  bool bernoulli(double p) { return uniform() < p; }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_; }

 private:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ULL;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t state_;
  std::uint64_t seed_;
  std::uint64_t stream_;
};

}  // namespace gwer
