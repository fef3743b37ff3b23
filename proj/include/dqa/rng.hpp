#pragma once

#include <cstdint>

namespace dqa {

/// SplitMix64 stream. This exact algorithm is part of the problem file
/// format: sparse-network coupling signs are drawn from it, so instances are
/// reproducible from (parameters, seed) in any implementation.
class SplitMix64 {
  public:
    static constexpr std::uint64_t golden = 0x9E3779B97F4A7C15ULL;

    explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

    constexpr std::uint64_t next() noexcept {
        state_ += golden;
        return mix(state_);
    }

    static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1) with 53 random bits.
    constexpr double uniform() noexcept {
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

  private:
    std::uint64_t state_;
};

/// Counter-based stream: the i-th draw is a pure function of (key, i), so
/// forked streams are independent of scheduling and worker count.
class CounterRng {
  public:
    using result_type = std::uint64_t;

    constexpr CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept
        : key_(SplitMix64::mix(seed ^ SplitMix64::mix(stream + SplitMix64::golden))) {}

    constexpr std::uint64_t next() noexcept {
        ++counter_;
        return SplitMix64::mix(key_ + counter_ * SplitMix64::golden);
    }

    constexpr double uniform() noexcept {
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

    /// Child stream derived from this stream's key.
    [[nodiscard]] constexpr CounterRng fork(std::uint64_t stream) const noexcept {
        return CounterRng(key_, stream);
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return ~result_type{0}; }
    constexpr result_type operator()() noexcept { return next(); }

  private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

} // namespace dqa
