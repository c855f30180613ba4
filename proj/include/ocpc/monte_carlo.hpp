#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <thread>
#include <vector>

#include "error.hpp"
#include "random.hpp"

namespace ocpc {

/// Result of a Monte Carlo estimate. `stderr_` is the sample standard error.
struct Estimate {
    double value = 0.0;
    double stderr_ = 0.0;
    std::uint64_t trials = 0;

    /// |value - reference| <= k * sigma, where sigma defaults to this estimate's own standard error.
    bool within(double reference, double k = 3.0) const { return std::abs(value - reference) <= k * stderr_; }
};

/// Standard error of a Bernoulli(p) frequency over n trials.
inline double bernoulli_stderr(double p, std::uint64_t n)
{
    return std::sqrt(std::max(0.0, p * (1.0 - p)) / static_cast<double>(n));
}

namespace detail {

template <std::size_t K>
struct Moments {
    std::array<long double, K> sum{};
    std::array<long double, K> sum_sq{};

    void add(const std::array<double, K>& x)
    {
        for (std::size_t j = 0; j < K; ++j) {
            sum[j] += x[j];
            sum_sq[j] += static_cast<long double>(x[j]) * x[j];
        }
    }

    void merge(const Moments& o)
    {
        for (std::size_t j = 0; j < K; ++j) {
            sum[j] += o.sum[j];
            sum_sq[j] += o.sum_sq[j];
        }
    }
};

} // namespace detail

/// Runs `trials` independent trials, each handed its own seed derived from
/// (root_seed, trial index), and returns one Estimate per output component.
///
/// Trials are cut into fixed-size chunks that are reduced in chunk order, so
/// the result does not depend on the number of worker threads.
template <std::size_t K, class TrialFn>
std::array<Estimate, K> run_trials_n(std::uint64_t trials, std::uint64_t root_seed, TrialFn&& fn)
{
    detail::require(trials >= 1, ErrorCode::invalid_input, "trials must be >= 1");
    constexpr std::uint64_t chunk = 2048;
    const std::uint64_t n_chunks = (trials + chunk - 1) / chunk;
    std::vector<detail::Moments<K>> partial(n_chunks);

    auto work = [&](std::uint64_t c) {
        const std::uint64_t begin = c * chunk;
        const std::uint64_t end = std::min(trials, begin + chunk);
        for (std::uint64_t t = begin; t < end; ++t)
            partial[c].add(fn(derive_seed(root_seed, {stream::trial, t})));
    };

    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const auto n_threads = static_cast<unsigned>(std::min<std::uint64_t>(hw, n_chunks));
    if (n_threads <= 1) {
        for (std::uint64_t c = 0; c < n_chunks; ++c) work(c);
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(n_threads);
        for (unsigned w = 0; w < n_threads; ++w)
            pool.emplace_back([&, w] {
                for (std::uint64_t c = w; c < n_chunks; c += n_threads) work(c);
            });
    }

    detail::Moments<K> total;
    for (const auto& m : partial) total.merge(m);

    std::array<Estimate, K> out{};
    const auto n = static_cast<long double>(trials);
    for (std::size_t j = 0; j < K; ++j) {
        const long double mean = total.sum[j] / n;
        long double var = trials > 1 ? (total.sum_sq[j] - n * mean * mean) / (n - 1.0L) : 0.0L;
        if (var < 0.0L) var = 0.0L;
        out[j] = {static_cast<double>(mean), static_cast<double>(std::sqrt(var / n)), trials};
    }
    return out;
}

template <class TrialFn>
Estimate run_trials(std::uint64_t trials, std::uint64_t root_seed, TrialFn&& fn)
{
    return run_trials_n<1>(trials, root_seed, [&](std::uint64_t s) { return std::array<double, 1>{fn(s)}; })[0];
}

} // namespace ocpc
