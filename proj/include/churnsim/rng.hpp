#pragma once

// Seeded random streams for the simulation.
//
// Every random quantity is drawn from a SplitMix64 stream whose seed is a
// hash of (master seed, tags...). Two calls with the same tags see the same
// stream; there is no global generator state.

#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>

#include <boost/random/normal_distribution.hpp>

namespace churnsim {

inline constexpr std::uint64_t splitmix64_mix(std::uint64_t z) noexcept
{
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Fold a sequence of tags into a 64-bit sub-stream seed.
inline constexpr std::uint64_t derive_seed(std::uint64_t master,
                                           std::initializer_list<std::uint64_t> tags) noexcept
{
    std::uint64_t h = splitmix64_mix(master + 0x9E3779B97F4A7C15ULL);
    for (std::uint64_t t : tags)
        h = splitmix64_mix(h ^ splitmix64_mix(t + 0x632BE59BD9B4E019ULL));
    return h;
}

/// Cheap child stream seed for the i-th member of a parent stream.
inline constexpr std::uint64_t child_seed(std::uint64_t parent, std::uint64_t index) noexcept
{
    return splitmix64_mix(parent ^ ((index + 1) * 0xD1B54A32D192ED03ULL));
}

/// SplitMix64 (Steele, Lea, Flood). Satisfies UniformRandomBitGenerator.
class SplitMix64 {
public:
    using result_type = std::uint64_t;

    explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    constexpr result_type operator()() noexcept
    {
        state_ += 0x9E3779B97F4A7C15ULL;
        return splitmix64_mix(state_);
    }

private:
    std::uint64_t state_;
};

/// Normal draws from one SplitMix64 stream (Boost ziggurat sampler).
/// A zero stddev returns the mean and consumes no randomness.
class NormalStream {
public:
    explicit NormalStream(std::uint64_t seed) : eng_(seed) {}

    double operator()(double mean, double stddev)
    {
        if (stddev == 0.0) return mean;
        return mean + stddev * unit_(eng_);
    }

    SplitMix64& engine() { return eng_; }

private:
    SplitMix64 eng_;
    boost::random::normal_distribution<double> unit_{0.0, 1.0};
};

/// Seed domains. Truth generation and fitting never share a stream.
enum class SeedDomain : std::uint64_t {
    truth_population = 1,
    truth_simulation = 2,
    episodes = 3,
    fit_simulation = 101,
    optimizer = 102,
};

inline constexpr std::uint64_t domain_seed(std::uint64_t master, SeedDomain d,
                                           std::uint64_t a = 0, std::uint64_t b = 0) noexcept
{
    return derive_seed(master, {static_cast<std::uint64_t>(d), a, b});
}

} // namespace churnsim
