#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>

namespace ocpc {

/// SplitMix64 generator. Cheap to construct, so every (trial, band, segment)
/// substream gets its own engine derived from the root seed.
class SplitMix64 {
public:
    using result_type = std::uint64_t;

    explicit SplitMix64(std::uint64_t seed = 0) noexcept : state_(seed) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept
    {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

private:
    std::uint64_t state_;
};

using Engine = SplitMix64;

inline std::uint64_t mix64(std::uint64_t x) noexcept
{
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Derives a child seed from a parent seed and a path of integer labels.
/// The result depends only on the labels, never on call order.
inline std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> path) noexcept
{
    std::uint64_t h = mix64(root + 0x9E3779B97F4A7C15ULL);
    for (std::uint64_t label : path)
        h = mix64(h ^ (mix64(label + 0x632BE59BD9B4E019ULL) + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2)));
    return h;
}

// Domain tags keep substreams of different subsystems apart.
namespace stream {
inline constexpr std::uint64_t channel = 1;
inline constexpr std::uint64_t tiebreak = 2;
inline constexpr std::uint64_t trial = 3;
inline constexpr std::uint64_t bank = 4;
inline constexpr std::uint64_t arrivals = 5;
inline constexpr std::uint64_t source = 6;
} // namespace stream

inline double uniform01(Engine& eng)
{
    return std::uniform_real_distribution<double>(0.0, 1.0)(eng);
}

inline std::uint64_t poisson_draw(Engine& eng, double mean)
{
    if (!(mean > 0.0)) return 0;
    return static_cast<std::uint64_t>(std::poisson_distribution<long long>(mean)(eng));
}

} // namespace ocpc
