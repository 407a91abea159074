#pragma once

// Deterministic, splittable random streams. Every consumer derives an
// independent 64-bit stream from (master seed, lane, element) with the
// splitmix64 finalizer, so parallel execution cannot change results.

#include <cstdint>

#include "qblue/gaussian.hpp"

namespace qblue {

namespace detail {

inline constexpr std::uint64_t golden_gamma = 0x9E3779B97F4A7C15ull;

inline constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
}

} // namespace detail

// Stream seed for element `b` of lane `a` under `master`. Two applications
// of the splitmix64 finalizer keyed by the golden gamma.
inline constexpr std::uint64_t derive_stream(std::uint64_t master, std::uint64_t a,
                                             std::uint64_t b) noexcept {
    return detail::mix64(detail::mix64(master + detail::golden_gamma * (a + 1)) +
                         detail::golden_gamma * (b + 1));
}

class SplitMix64 {
public:
    explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

    constexpr std::uint64_t next_u64() noexcept {
        state_ += detail::golden_gamma;
        return detail::mix64(state_);
    }

    // Uniform on the open interval (0,1); endpoints are unreachable.
    double next_uniform() noexcept {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    // Standard normal by inverse-CDF transform of one uniform draw, so the
    // whole simulation pipeline rests on the same validated quantile code.
    double next_gaussian() { return std_normal_inv_cdf(next_uniform()); }

private:
    std::uint64_t state_;
};

} // namespace qblue
