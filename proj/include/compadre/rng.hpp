#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace compadre {

/// Philox4x32-10 counter-based generator.
///
/// Streams are addressed by (seed, stream): the seed forms the key and the
/// stream id the high counter word, so replicate `r` of a run can draw from
/// Philox(seed, r) without coordinating with other replicates. Output is
/// identical on every platform for the same (seed, stream) pair.
class Philox {
 public:
  explicit Philox(std::uint64_t seed, std::uint64_t stream = 0)
      : key_{static_cast<std::uint32_t>(seed & 0xffffffffu),
             static_cast<std::uint32_t>(seed >> 32)},
        stream_(stream) {}

  std::uint32_t next_u32() {
    if (have_ == 0) {
      refill();
    }
    return out_[--have_];
  }

  std::uint64_t next_u64() {
    const std::uint64_t hi = next_u32();
    return (hi << 32) | next_u32();
  }

  /// Uniform draw in [0, 1) with 53 random mantissa bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via the Marsaglia polar method (log/sqrt only).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    has_spare_ = true;
    return u * m;
  }

  /// Integer in [0, n) by rejection (unbiased).
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

 private:
  static std::pair<std::uint32_t, std::uint32_t> mulhilo(std::uint32_t a,
                                                         std::uint32_t b) {
    const std::uint64_t prod = static_cast<std::uint64_t>(a) * b;
    return {static_cast<std::uint32_t>(prod >> 32),
            static_cast<std::uint32_t>(prod & 0xffffffffu)};
  }

  void refill() {
    std::array<std::uint32_t, 4> ctr = {
        static_cast<std::uint32_t>(counter_ & 0xffffffffu),
        static_cast<std::uint32_t>(counter_ >> 32),
        static_cast<std::uint32_t>(stream_ & 0xffffffffu),
        static_cast<std::uint32_t>(stream_ >> 32)};
    std::array<std::uint32_t, 2> key = key_;
    for (int round = 0; round < 10; ++round) {
      const auto [hi0, lo0] = mulhilo(0xD2511F53u, ctr[0]);
      const auto [hi1, lo1] = mulhilo(0xCD9E8D57u, ctr[2]);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
      key[0] += 0x9E3779B9u;
      key[1] += 0xBB67AE85u;
    }
    out_ = ctr;
    have_ = 4;
    ++counter_;
  }

  std::array<std::uint32_t, 2> key_;
  std::uint64_t stream_ = 0;
  std::uint64_t counter_ = 0;
  std::array<std::uint32_t, 4> out_{};
  int have_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace compadre
