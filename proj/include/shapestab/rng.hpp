#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace shapestab {

/// Philox4x32-10 counter-based generator (Salmon et al., Random123). Output is
/// a pure function of (counter, key), so any simulation step can be replayed
/// without generator state.
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter generate(Counter ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kW0;
        key[1] += kW1;
      }
      const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * ctr[0];
      const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * ctr[2];
      ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kM0 = 0xD2511F53u;
  static constexpr std::uint32_t kM1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kW0 = 0x9E3779B9u;
  static constexpr std::uint32_t kW1 = 0xBB67AE85u;
};

/// Two 64-bit uniform words for (seed, stream, index, lane); the simulator
/// uses stream = replica id and index = step number.
struct UniformPair {
  std::uint64_t first;
  std::uint64_t second;
};

inline UniformPair draw(std::uint64_t seed, std::uint32_t stream, std::uint64_t index, std::uint32_t lane = 0) {
  const Philox4x32::Counter ctr{static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), stream,
                                lane};
  const Philox4x32::Key key{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  const auto out = Philox4x32::generate(ctr, key);
  return {static_cast<std::uint64_t>(out[1]) << 32 | out[0], static_cast<std::uint64_t>(out[3]) << 32 | out[2]};
}

/// Uniform double in [0, 1) from the top 53 bits.
inline double to_unit(std::uint64_t u) { return static_cast<double>(u >> 11) * 0x1.0p-53; }

/// Sequential stream on top of draw(); deterministic, used for generating
/// test instances and random tables.
class CounterStream {
 public:
  CounterStream(std::uint64_t seed, std::uint32_t stream, std::uint32_t lane = 0)
      : seed_(seed), stream_(stream), lane_(lane) {}

  std::uint64_t next() {
    if (!have_second_) {
      const auto pair = draw(seed_, stream_, index_++, lane_);
      second_ = pair.second;
      have_second_ = true;
      return pair.first;
    }
    have_second_ = false;
    return second_;
  }

  /// Unbiased integer in [0, bound) by rejection.
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t limit = bound == 0 ? 0 : (0 - bound) % bound;
    while (true) {
      const std::uint64_t u = next();
      if (u >= limit) return u % bound;
    }
  }

  /// Integer in [lo, hi].
  std::int64_t between(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo) + 1));
  }

  double unit() { return to_unit(next()); }

 private:
  std::uint64_t seed_;
  std::uint32_t stream_;
  std::uint32_t lane_;
  std::uint64_t index_ = 0;
  std::uint64_t second_ = 0;
  bool have_second_ = false;
};

/// k distinct sorted values from [0, m) (Floyd's algorithm).
std::vector<std::uint64_t> sample_distinct(CounterStream& rng, std::uint64_t m, std::uint64_t k);

}  // namespace shapestab
