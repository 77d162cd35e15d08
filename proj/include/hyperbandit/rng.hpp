// Seeded random streams. Every stochastic component derives its engine from
// (seed, stream tag, index) so results never depend on call interleaving.
#pragma once

#include <cstdint>
#include <random>

namespace hyperbandit {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0) {
    return splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ index);
}

/// SplitMix64 as a UniformRandomBitGenerator. Cheap to construct, so streams
/// can be keyed per step without caching engines.
class Rng {
public:
    using result_type = std::uint64_t;

    constexpr explicit Rng(std::uint64_t seed = 0) noexcept : state_(seed) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return ~result_type{0}; }

    constexpr result_type operator()() noexcept {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1).
    double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) noexcept {
        std::uniform_int_distribution<std::uint64_t> d(0, n - 1);
        return d(*this);
    }

    double normal() {
        std::normal_distribution<double> d(0.0, 1.0);
        return d(*this);
    }

    friend bool operator==(const Rng&, const Rng&) = default;

private:
    std::uint64_t state_;
};

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0) {
    return Rng(mix_seed(seed, stream, index));
}

// Stream tags.
namespace streams {
inline constexpr std::uint64_t kUsers = 0x11;
inline constexpr std::uint64_t kItems = 0x12;
inline constexpr std::uint64_t kGroundTruth = 0x13;
inline constexpr std::uint64_t kStep = 0x14;
inline constexpr std::uint64_t kNoise = 0x15;
inline constexpr std::uint64_t kDrift = 0x16;
inline constexpr std::uint64_t kXavier = 0x21;
inline constexpr std::uint64_t kShuffle = 0x22;
inline constexpr std::uint64_t kRandomPolicy = 0x31;
inline constexpr std::uint64_t kOracleProvider = 0x41;
inline constexpr std::uint64_t kNegatives = 0x42;
}  // namespace streams

}  // namespace hyperbandit
