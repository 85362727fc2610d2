#pragma once

#include <cstdint>

namespace segfuse {

namespace detail {

/// SplitMix64 finalizer: full 64-bit avalanche.
constexpr uint64_t splitmix64_fin(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

} // namespace detail

/// Combine two 64-bit values into one well-mixed stream id. Used to derive
/// per-record random streams so results never depend on scheduling.
constexpr uint64_t mix64(uint64_t a, uint64_t b) {
    return detail::splitmix64_fin(a + 0x9E3779B97F4A7C15ULL * (b + 0x632BE59BD9B4E019ULL));
}

constexpr uint64_t mix64(uint64_t a, uint64_t b, uint64_t c) { return mix64(mix64(a, b), c); }

/// Small deterministic generator with a platform-independent output sequence.
/// Standard-library distributions are implementation-defined, so all draws
/// the pipeline depends on go through this engine.
class SplitMix64 {
public:
    explicit constexpr SplitMix64(uint64_t seed) : state_(seed) {}

    constexpr uint64_t next() {
        state_ += 0x9E3779B97F4A7C15ULL;
        return detail::splitmix64_fin(state_);
    }

    /// Uniform in [0, 1) with 53 random bits.
    double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    /// Uniform in [0, n), unbiased. n must be >= 1.
    uint64_t uniform_below(uint64_t n) {
        const uint64_t threshold = (0 - n) % n;
        for (;;) {
            uint64_t r = next();
            if (r >= threshold)
                return r % n;
        }
    }

    /// Uniform integer in [lo, hi], inclusive.
    int64_t uniform_int(int64_t lo, int64_t hi) {
        return lo + static_cast<int64_t>(uniform_below(static_cast<uint64_t>(hi - lo) + 1));
    }

private:
    uint64_t state_;
};

} // namespace segfuse
