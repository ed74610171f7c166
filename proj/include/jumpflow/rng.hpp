#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

namespace jumpflow {

/// Philox4x32-10 counter-based generator.
///
/// A stream is identified by (key, stream id, tag); the 64-bit block counter
/// occupies the remaining counter words. Distinct (path, purpose) pairs get
/// disjoint counter spaces, so results never depend on how paths are
/// scheduled across threads.
class Philox4x32 {
  public:
    using result_type = std::uint64_t;
    using Block = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    Philox4x32(std::uint64_t seed, std::uint32_t stream, std::uint32_t tag);

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()();

    /// Raw bijection, exposed for known-answer tests.
    static Block encrypt(Block counter, Key key);

  private:
    Key key_;
    std::uint32_t stream_;
    std::uint32_t tag_;
    std::uint64_t block_ = 0;
    Block buffer_{};
    int used_ = 4;
};

/// Purposes of the independent per-path streams.
enum class StreamTag : std::uint32_t {
    initial = 1,
    gaussian = 2,
    clock = 3,
    mark = 4,
    thinning = 5,
    tilt = 6,
    probe = 7,
};

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Philox4x32& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Exponential variate with the given rate (> 0).
inline double exponential(Philox4x32& rng, double rate) {
    return -std::log1p(-uniform01(rng)) / rate;
}

/// A stream plus a cached normal sampler.
struct GaussianStream {
    GaussianStream(std::uint64_t seed, std::uint32_t stream)
        : rng(seed, stream, static_cast<std::uint32_t>(StreamTag::gaussian)) {}

    double operator()() { return normal(rng); }

    Philox4x32 rng;
    std::normal_distribution<double> normal{0.0, 1.0};
};

/// All streams used by one simulated path.
struct PathStreams {
    PathStreams(std::uint64_t seed, std::uint32_t path)
        : initial(seed, path, static_cast<std::uint32_t>(StreamTag::initial)),
          gaussian(seed, path),
          clock(seed, path, static_cast<std::uint32_t>(StreamTag::clock)),
          mark(seed, path, static_cast<std::uint32_t>(StreamTag::mark)),
          thinning(seed, path, static_cast<std::uint32_t>(StreamTag::thinning)),
          tilt(seed, path, static_cast<std::uint32_t>(StreamTag::tilt)) {}

    Philox4x32 initial;
    GaussianStream gaussian;
    Philox4x32 clock;
    Philox4x32 mark;
    Philox4x32 thinning;
    Philox4x32 tilt;
};

}  // namespace jumpflow
