#pragma once

// Counter-based random numbers (Philox4x32-10) with explicit stream splitting.
//
// Every random quantity in the library is a pure function of
// (seed, stream, counter). A 64-bit seed is the Philox key; the 128-bit
// counter is laid out as [index lo, index hi, stream, 0]. Replica r of a run
// with base seed S uses seed `replica_seed(S, r) = S ^ splitmix64(r)`.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <utility>

namespace cbbm {

/// Philox4x32 with 10 rounds (Salmon et al., SC'11).
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter generate(Counter ctr, Key key) noexcept {
    constexpr std::uint32_t kMul0 = 0xD2511F53u;
    constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const auto lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const auto lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }
};

/// Named sub-streams. Each consumer of randomness owns one.
enum class Stream : std::uint32_t {
  tree = 1,          // lifetimes and offspring counts, indexed by node id
  field = 2,         // (x, z) increments, indexed by node id
  bridge_fill = 3,   // intra-edge Brownian bridge points for envelope checks
  sequential = 4,    // general-purpose sequential draws
  cluster = 5,       // rejection-sampler attempt seeds
  limit = 6,         // Cox atoms, cluster picks and circle marks
  synthetic = 7,     // synthetic data for calibration
};

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Seed of replica `index` under base seed `seed`.
constexpr std::uint64_t replica_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  return seed ^ splitmix64(index);
}

/// 128 random bits at position `index` of `stream` under `seed`.
inline std::array<std::uint64_t, 2> random_block(std::uint64_t seed, Stream stream,
                                                 std::uint64_t index) noexcept {
  const Philox4x32::Counter ctr{static_cast<std::uint32_t>(index),
                                static_cast<std::uint32_t>(index >> 32),
                                static_cast<std::uint32_t>(stream), 0u};
  const Philox4x32::Key key{static_cast<std::uint32_t>(seed),
                            static_cast<std::uint32_t>(seed >> 32)};
  const auto out = Philox4x32::generate(ctr, key);
  return {(std::uint64_t{out[1]} << 32) | out[0], (std::uint64_t{out[3]} << 32) | out[2]};
}

/// Uniform in the open interval (0, 1), 53-bit resolution.
constexpr double unit_open(std::uint64_t bits) noexcept {
  return (static_cast<double>(bits >> 12) + 0.5) * 0x1.0p-52;
}

/// Two independent standard normals from 128 bits (Box-Muller).
inline std::pair<double, double> normal_pair(std::array<std::uint64_t, 2> bits) noexcept {
  const double radius = std::sqrt(-2.0 * std::log(unit_open(bits[0])));
  const double angle = 2.0 * std::numbers::pi * unit_open(bits[1]);
  return {radius * std::cos(angle), radius * std::sin(angle)};
}

/// Sequential generator over one Philox stream. Satisfies
/// UniformRandomBitGenerator so it can drive <random> adaptors, but the
/// member samplers below are preferred since they are bit-stable across
/// standard libraries.
class StreamRng {
 public:
  using result_type = std::uint64_t;

  StreamRng(std::uint64_t seed, Stream stream, std::uint64_t start = 0) noexcept
      : seed_(seed), stream_(stream), next_block_(start) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept {
    if (used_ == 2) {
      buffer_ = random_block(seed_, stream_, next_block_++);
      used_ = 0;
    }
    return buffer_[used_++];
  }

  double uniform() noexcept { return unit_open((*this)()); }

  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const auto [a, b] = normal_pair({(*this)(), (*this)()});
    spare_ = b;
    has_spare_ = true;
    return a;
  }

  double exponential() noexcept { return -std::log(uniform()); }

  /// Uniform integer in [0, n). Multiply-shift; bias below 2^-64 * n.
  std::uint64_t below(std::uint64_t n) noexcept {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>((*this)()) * n) >> 64);
  }

  /// Poisson(mean) by counting unit-rate arrivals; O(mean) work.
  std::uint64_t poisson(double mean) noexcept {
    std::uint64_t count = 0;
    double clock = exponential();
    while (clock < mean) {
      ++count;
      clock += exponential();
    }
    return count;
  }

 private:
  std::uint64_t seed_;
  Stream stream_;
  std::uint64_t next_block_;
  std::array<std::uint64_t, 2> buffer_{};
  int used_ = 2;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace cbbm
