#pragma once

#include <array>
#include <cstdint>

namespace gffpin {

/// Philox4x32-10 block function (Salmon et al., Random123).
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key) {
  constexpr std::uint32_t kM0 = 0xD2511F53u, kM1 = 0xCD9E8D57u;
  constexpr std::uint32_t kW0 = 0x9E3779B9u, kW1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = std::uint64_t{kM0} * ctr[0];
    const std::uint64_t p1 = std::uint64_t{kM1} * ctr[2];
    ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
           static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
    key[0] += kW0;
    key[1] += kW1;
  }
  return ctr;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Child seed for job `index` of kind `tag` under `base`; distinct (tag, index) pairs give
/// unrelated seeds.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag, std::uint64_t index) {
  return splitmix64(splitmix64(base ^ splitmix64(tag)) + index);
}

/// Seed domains keep environment draws, dynamics draws and exact free-field draws apart
/// even when the user passes the same integer seed to all of them.
enum class StreamDomain : std::uint32_t {
  dynamics = 1,
  environment = 2,
  free_field = 3,
  quadrature = 4,
};

/// Counter-based uniform stream addressed by (seed, domain, step, site).
///
/// The draws for a given address never depend on what other addresses were visited,
/// which is what makes checkerboard sweeps thread-count independent.
class CounterStream {
 public:
  CounterStream(std::uint64_t seed, StreamDomain domain, std::uint64_t step, std::uint32_t site)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        site_(site),
        step_lo_(static_cast<std::uint32_t>(step)),
        tag_((static_cast<std::uint32_t>(domain) << 24) | (static_cast<std::uint32_t>(step >> 32) & 0xFFFFFFu)) {}

  /// Uniform in the open interval (0, 1) with 53 random bits.
  double uniform() {
    if (used_ == 2) refill();
    const std::uint64_t bits = (std::uint64_t{buf_[2 * used_]} << 32) | buf_[2 * used_ + 1];
    ++used_;
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
  }

 private:
  void refill() {
    buf_ = philox4x32({site_, block_++, step_lo_, tag_}, key_);
    used_ = 0;
  }

  std::array<std::uint32_t, 2> key_;
  std::uint32_t site_;
  std::uint32_t step_lo_;
  std::uint32_t tag_;
  std::uint32_t block_ = 0;
  std::array<std::uint32_t, 4> buf_{};
  int used_ = 2;
};

}  // namespace gffpin
