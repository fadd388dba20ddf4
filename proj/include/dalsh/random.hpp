#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>

#include <boost/random/normal_distribution.hpp>

namespace dalsh {

/// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// Folds a list of words into a seed. Order matters.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> parts) noexcept {
    std::uint64_t h = mix64(base + 0x9E3779B97F4A7C15ull);
    for (std::uint64_t p : parts) {
        h = mix64(h ^ (p + 0x9E3779B97F4A7C15ull + (h << 6) + (h >> 2)));
    }
    return h;
}

/// Keyed counter-based generator: draw j of stream (key, stream) is a pure
/// function of (key, stream, j). Satisfies UniformRandomBitGenerator.
class CounterRng {
public:
    using result_type = std::uint64_t;

    explicit CounterRng(std::uint64_t key, std::uint64_t stream = 0) noexcept
        : key_(derive_seed(key, {stream})) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        ++counter_;
        return mix64(key_ + counter_ * 0x9E3779B97F4A7C15ull);
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    /// Standard normal draw.
    double normal() noexcept { return normal_(*this); }

    std::uint64_t counter() const noexcept { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    boost::random::normal_distribution<double> normal_;
};

} // namespace dalsh
