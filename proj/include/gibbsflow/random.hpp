#ifndef GIBBSFLOW_RANDOM_HPP
#define GIBBSFLOW_RANDOM_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace gibbsflow {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11). The key is
/// the 64-bit experiment seed; the 128-bit counter is (draw, stream), so a
/// sample's variates depend only on (seed, sample index, draw index).
class Philox4x32 {
 public:
  using Block = std::array<std::uint32_t, 4>;

  Philox4x32(std::uint64_t seed, std::uint64_t stream)
      : key_{static_cast<std::uint32_t>(seed),
             static_cast<std::uint32_t>(seed >> 32)},
        stream_(stream) {}

  Block block(std::uint64_t counter) const {
    Block ctr{static_cast<std::uint32_t>(counter),
              static_cast<std::uint32_t>(counter >> 32),
              static_cast<std::uint32_t>(stream_),
              static_cast<std::uint32_t>(stream_ >> 32)};
    std::array<std::uint32_t, 2> key = key_;
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
      ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0],
             static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1],
             static_cast<std::uint32_t>(p0)};
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  std::array<std::uint32_t, 2> key_;
  std::uint64_t stream_;
};

/// Sequential view of one Philox stream: uniforms in (0, 1) and standard
/// normals via Box-Muller (both halves used).
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t stream) : gen_(seed, stream) {}

  double uniform() {
    if (pos_ == 4) refill();
    const std::uint32_t hi = buf_[pos_++];
    if (pos_ == 4) refill();
    const std::uint32_t lo = buf_[pos_++];
    const std::uint64_t bits = (std::uint64_t{hi} << 21) ^ (lo >> 11);
    // 53 random bits mapped to the open interval (0, 1).
    return (static_cast<double>(bits & ((std::uint64_t{1} << 53) - 1)) + 0.5) *
           0x1.0p-53;
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform()));
    const double angle = 2.0 * std::numbers::pi * uniform();
    spare_ = r * std::sin(angle);
    has_spare_ = true;
    return r * std::cos(angle);
  }

 private:
  void refill() {
    buf_ = gen_.block(counter_++);
    pos_ = 0;
  }

  Philox4x32 gen_;
  Philox4x32::Block buf_{};
  int pos_ = 4;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace gibbsflow

#endif  // GIBBSFLOW_RANDOM_HPP
