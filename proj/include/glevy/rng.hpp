#pragma once

// Counter-based generator (Philox 4x32-10, Salmon et al., SC'11). Draws are a
// pure function of (seed, stream, position), so one stream per path index
// gives batches that reproduce bit-for-bit under any execution order.

#include <array>
#include <cmath>
#include <cstdint>

namespace glevy {

class Philox {
 public:
  Philox(uint64_t seed, uint64_t stream) {
    key_[0] = static_cast<uint32_t>(seed);
    key_[1] = static_cast<uint32_t>(seed >> 32);
    ctr_[0] = 0;
    ctr_[1] = 0;
    ctr_[2] = static_cast<uint32_t>(stream);
    ctr_[3] = static_cast<uint32_t>(stream >> 32);
  }

  uint32_t next_u32() {
    if (pos_ == 4) fill_block();
    return out_[pos_++];
  }

  uint64_t next_u64() {
    const uint64_t lo = next_u32();
    const uint64_t hi = next_u32();
    return (hi << 32) | lo;
  }

  /// Uniform in (0, 1]; safe as an argument of log().
  double uniform_pos() { return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53; }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller; the second value of each pair is cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    constexpr double two_pi = 6.283185307179586476925286766559;
    const double r = std::sqrt(-2.0 * std::log(uniform_pos()));
    const double a = two_pi * uniform();
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  /// Exponential with unit rate.
  double exponential() { return -std::log(uniform_pos()); }

 private:
  static void mulhilo(uint32_t a, uint32_t b, uint32_t& hi, uint32_t& lo) {
    const uint64_t p = static_cast<uint64_t>(a) * b;
    hi = static_cast<uint32_t>(p >> 32);
    lo = static_cast<uint32_t>(p);
  }

  void fill_block() {
    std::array<uint32_t, 4> c = ctr_;
    std::array<uint32_t, 2> k = key_;
    for (int round = 0; round < 10; ++round) {
      uint32_t hi0, lo0, hi1, lo1;
      mulhilo(0xD2511F53u, c[0], hi0, lo0);
      mulhilo(0xCD9E8D57u, c[2], hi1, lo1);
      c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
      k[0] += 0x9E3779B9u;
      k[1] += 0xBB67AE85u;
    }
    out_ = c;
    pos_ = 0;
    // 64-bit block counter; the stream id lives in ctr_[2..3].
    if (++ctr_[0] == 0) ++ctr_[1];
  }

  std::array<uint32_t, 4> ctr_{};
  std::array<uint32_t, 2> key_{};
  std::array<uint32_t, 4> out_{};
  int pos_ = 4;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace glevy
