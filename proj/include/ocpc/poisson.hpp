#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "error.hpp"

namespace ocpc {

/// Numerical policy for infinite Poisson sums: keep the smallest window of
/// outcomes whose discarded mass is below `tail_tolerance`.
class PoissonTruncation {
public:
    explicit PoissonTruncation(double tail_tolerance = 1e-12) : tail_tolerance_(tail_tolerance)
    {
        detail::require(tail_tolerance > 0.0 && tail_tolerance < 1.0, ErrorCode::domain,
                        "tail_tolerance must lie in (0, 1), got " + std::to_string(tail_tolerance));
    }

    double tail_tolerance() const noexcept { return tail_tolerance_; }

private:
    double tail_tolerance_;
};

/// Window [first, first + pmf.size()) of a Poisson law plus the mass outside it.
struct PoissonWindow {
    std::uint64_t first = 0;
    std::vector<double> pmf;
    double truncated_mass = 0.0;

    std::uint64_t last() const noexcept { return first + pmf.size() - 1; }
};

inline double poisson_log_pmf(std::uint64_t n, double mean)
{
    if (mean == 0.0) return n == 0 ? 0.0 : -std::numeric_limits<double>::infinity();
    const long double k = static_cast<long double>(n);
    return static_cast<double>(k * std::log(static_cast<long double>(mean)) - mean - std::lgammal(k + 1.0L));
}

inline double poisson_pmf(std::uint64_t n, double mean) { return std::exp(poisson_log_pmf(n, mean)); }

/// Central window of Poi(mean), grown greedily from the mode toward the
/// heavier neighbour until the kept mass reaches 1 - tolerance.
inline PoissonWindow poisson_window(double mean, const PoissonTruncation& trunc = PoissonTruncation{})
{
    detail::require(mean >= 0.0 && std::isfinite(mean), ErrorCode::domain,
                    "Poisson mean must be finite and >= 0, got " + std::to_string(mean));
    PoissonWindow w;
    if (mean == 0.0) {
        w.pmf = {1.0};
        return w;
    }

    const long double lambda = mean;
    const auto mode = static_cast<std::uint64_t>(std::floor(mean));
    const long double p_mode = std::exp(static_cast<long double>(poisson_log_pmf(mode, mean)));

    std::vector<long double> below; // mode-1, mode-2, ...
    std::vector<long double> above; // mode, mode+1, ...
    above.push_back(p_mode);
    long double kept = p_mode;
    long double next_low = mode > 0 ? p_mode * static_cast<long double>(mode) / lambda : 0.0L;
    long double next_high = p_mode * lambda / static_cast<long double>(mode + 1);
    std::uint64_t low = mode;        // smallest index kept
    std::uint64_t high = mode;       // largest index kept
    const long double target = 1.0L - static_cast<long double>(trunc.tail_tolerance());
    const long double negligible = static_cast<long double>(trunc.tail_tolerance()) * 1e-6L;

    while (kept < target) {
        if (next_low <= negligible && next_high <= negligible)
            throw Error(ErrorCode::tolerance,
                        "tail_tolerance " + std::to_string(trunc.tail_tolerance()) +
                            " is below the attainable precision for mean " + std::to_string(mean));
        if (next_low >= next_high) {
            below.push_back(next_low);
            kept += next_low;
            --low;
            next_low = low > 0 ? next_low * static_cast<long double>(low) / lambda : 0.0L;
        } else {
            above.push_back(next_high);
            kept += next_high;
            ++high;
            next_high = next_high * lambda / static_cast<long double>(high + 1);
        }
    }

    w.first = low;
    w.pmf.reserve(below.size() + above.size());
    for (auto it = below.rbegin(); it != below.rend(); ++it) w.pmf.push_back(static_cast<double>(*it));
    for (long double p : above) w.pmf.push_back(static_cast<double>(p));
    w.truncated_mass = static_cast<double>(std::max(0.0L, 1.0L - kept));
    return w;
}

/// P(Poi(mean) <= k).
inline double poisson_cdf(std::uint64_t k, double mean)
{
    detail::require(mean >= 0.0, ErrorCode::domain, "Poisson mean must be >= 0");
    if (mean == 0.0) return 1.0;
    const long double lambda = mean;
    long double pk = std::exp(static_cast<long double>(poisson_log_pmf(k, mean)));
    if (static_cast<double>(k) < mean) {
        long double sum = 0.0L;
        long double p = pk;
        for (std::uint64_t n = k;; --n) {
            sum += p;
            if (n == 0 || p < sum * 1e-21L) break;
            p = p * static_cast<long double>(n) / lambda;
        }
        return static_cast<double>(std::min(1.0L, sum));
    }
    long double tail = 0.0L;
    long double p = pk * lambda / static_cast<long double>(k + 1);
    for (std::uint64_t n = k + 1; p > 0.0L; ++n) {
        tail += p;
        if (p < 1e-21L * (tail + 1e-300L) || p < 1e-40L) break;
        p = p * lambda / static_cast<long double>(n + 1);
    }
    return static_cast<double>(std::max(0.0L, 1.0L - tail));
}

/// P(Poi(mean) <= x) for real x, with P(. <= +inf) = 1.
inline double poisson_cdf_real(double x, double mean)
{
    if (x < 0.0) return 0.0;
    if (!std::isfinite(x) || x >= 9.0e18) return 1.0;
    return poisson_cdf(static_cast<std::uint64_t>(std::floor(x)), mean);
}

} // namespace ocpc
