// SPDX-License-Identifier: Apache-2.0
//
// Counter-based random streams. Every draw is a pure function of
// (seed, stream, substream, counter), so trajectory i produces the same
// numbers no matter which worker simulates it.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace affrec {

/// Philox4x32 with 10 rounds (Salmon et al., SC'11).
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static constexpr Counter generate(Counter ctr, Key key) {
    for (int r = 0; r < 10; ++r) {
      if (r > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const auto lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const auto lo1 = static_cast<std::uint32_t>(p1);
      ctr = Counter{hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }
};

/// Purpose tags keep the stationary, dual and forward streams of one seed
/// disjoint.
enum class StreamPurpose : std::uint32_t {
  kForward = 0,
  kStationary = 1,
  kDual = 2,
  kSynthetic = 3,
  kAuxiliary = 4,
};

class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream, std::uint32_t substream = 0)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        stream_(stream),
        substream_(substream) {}

  RngStream(std::uint64_t seed, std::uint64_t stream, StreamPurpose purpose)
      : RngStream(seed, stream, static_cast<std::uint32_t>(purpose)) {}

  std::uint64_t seed() const { return std::uint64_t{key_[0]} | (std::uint64_t{key_[1]} << 32); }
  std::uint64_t stream() const { return stream_; }
  std::uint64_t counter() const { return counter_; }

  std::uint64_t next_u64() {
    if (buffered_ == 0) refill();
    --buffered_;
    return buffer_[buffered_];
  }

  /// Uniform on the open interval (0, 1).
  double uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal by Box-Muller; one value per call.
  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

 private:
  void refill() {
    const Philox4x32::Counter ctr{static_cast<std::uint32_t>(counter_),
                                  static_cast<std::uint32_t>(counter_ >> 32) ^ substream_,
                                  static_cast<std::uint32_t>(stream_),
                                  static_cast<std::uint32_t>(stream_ >> 32)};
    const auto out = Philox4x32::generate(ctr, key_);
    buffer_[0] = std::uint64_t{out[0]} | (std::uint64_t{out[1]} << 32);
    buffer_[1] = std::uint64_t{out[2]} | (std::uint64_t{out[3]} << 32);
    buffered_ = 2;
    ++counter_;
  }

  Philox4x32::Key key_;
  std::uint64_t stream_;
  std::uint32_t substream_;
  std::uint64_t counter_ = 0;
  std::array<std::uint64_t, 2> buffer_{};
  int buffered_ = 0;
};

}  // namespace affrec
