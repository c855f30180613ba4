#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "channel.hpp"
#include "error.hpp"
#include "monte_carlo.hpp"
#include "normal.hpp"
#include "poisson.hpp"
#include "random.hpp"

namespace ocpc {

namespace detail {

/// x ln x with 0 ln 0 = 0.
inline double xlogx(double x) { return x == 0.0 ? 0.0 : x * std::log(x); }

/// ln(1 + (alpha - 1)/L): log of the reference rate gamma.
inline double log_gamma_rate(double alpha, std::uint64_t bands)
{
    return std::log1p((alpha - 1.0) / static_cast<double>(bands));
}

inline void check_alpha(double alpha)
{
    require(alpha >= 0.0 && std::isfinite(alpha), ErrorCode::domain,
            "alpha must be finite and >= 0, got " + std::to_string(alpha));
}

inline void check_duration(double t)
{
    require(t > 0.0 && std::isfinite(t), ErrorCode::domain, "T must be finite and > 0, got " + std::to_string(t));
}

/// ln(1 - (1 - e^{-T})^M), stable for large T and M.
inline double log1m_pow_1m_exp(double t, double m)
{
    const double log_all_hit = m * std::log1p(-std::exp(-t)); // ln (1 - e^{-T})^M
    return std::log(-std::expm1(log_all_hit));
}

} // namespace detail

/// Capacity in nats per unit time; alpha ln alpha - (L + alpha - 1) ln(1 + (alpha - 1)/L),
/// or alpha ln(alpha/e) + 1 for unlimited diversity.
inline double capacity(const Diversity& diversity, double alpha)
{
    detail::check_alpha(alpha);
    double c;
    if (diversity.is_infinite()) {
        c = detail::xlogx(alpha) - alpha + 1.0;
    } else {
        const auto l = static_cast<double>(diversity.bands());
        c = detail::xlogx(alpha) - (l + alpha - 1.0) * detail::log_gamma_rate(alpha, diversity.bands());
    }
    return std::max(0.0, c);
}

/// C_L = -(L - 1) ln(1 - 1/L), the capacity of the fully blocking channel (1 when L is unlimited).
inline double blocking_capacity(const Diversity& diversity)
{
    if (diversity.is_infinite()) return 1.0;
    const auto l = static_cast<double>(diversity.bands());
    return -(l - 1.0) * std::log1p(-1.0 / l);
}

/// Dispersion in nats^2 per unit time.
inline double dispersion(const Diversity& diversity, double alpha)
{
    detail::check_alpha(alpha);
    if (diversity.is_infinite()) {
        if (alpha == 0.0) return 0.0;
        const double la = std::log(alpha);
        return alpha * la * la;
    }
    const auto l = static_cast<double>(diversity.bands());
    const double lg = detail::log_gamma_rate(alpha, diversity.bands());
    const double blocked = alpha == 0.0 ? 0.0 : alpha * (lg - std::log(alpha)) * (lg - std::log(alpha));
    return blocked + (l - 1.0) * lg * lg;
}

/// Discrete law of the information density: sorted (value, probability) atoms
/// plus the probability discarded by truncation.
struct SpectrumDistribution {
    std::vector<std::pair<double, double>> atoms;
    double truncation_mass = 0.0;

    double mean() const
    {
        long double m = 0.0L;
        for (const auto& [v, p] : atoms) m += static_cast<long double>(v) * p;
        return static_cast<double>(m);
    }

    double variance() const
    {
        const long double mu = mean();
        long double s = 0.0L;
        for (const auto& [v, p] : atoms) s += (v - mu) * (v - mu) * p;
        return static_cast<double>(s);
    }

    double total_probability() const
    {
        long double s = truncation_mass;
        for (const auto& a : atoms) s += a.second;
        return static_cast<double>(s);
    }
};

namespace detail {

inline void add_atom(std::vector<std::pair<double, double>>& atoms, double value, double p)
{
    if (p > 0.0) atoms.emplace_back(value, p);
}

inline SpectrumDistribution merge_atoms(std::vector<std::pair<double, double>> atoms, double truncation_mass)
{
    std::sort(atoms.begin(), atoms.end());
    SpectrumDistribution out;
    out.truncation_mass = truncation_mass;
    for (const auto& [v, p] : atoms) {
        if (!out.atoms.empty() && out.atoms.back().first == v)
            out.atoms.back().second += p;
        else
            out.atoms.emplace_back(v, p);
    }
    return out;
}

} // namespace detail

/// Information spectrum over duration T: the law of
/// Z1 ln alpha - (Z1 + Z2) ln gamma with Z1 ~ Poi(alpha T), Z2 ~ Poi((L - 1) T).
/// For unlimited diversity the value is Z1 ln alpha - (alpha - 1) T.
inline SpectrumDistribution spectrum(const Diversity& diversity, double alpha, double t,
                                     const PoissonTruncation& trunc = PoissonTruncation{})
{
    detail::check_alpha(alpha);
    detail::check_duration(t);
    const double log_alpha = alpha == 0.0 ? 0.0 : std::log(alpha); // only z1 = 0 occurs when alpha = 0
    const auto z1 = poisson_window(alpha * t, trunc);
    std::vector<std::pair<double, double>> atoms;

    if (diversity.is_infinite()) {
        for (std::size_t a = 0; a < z1.pmf.size(); ++a) {
            const auto n1 = static_cast<double>(z1.first + a);
            detail::add_atom(atoms, n1 * log_alpha - (alpha - 1.0) * t, z1.pmf[a]);
        }
        return detail::merge_atoms(std::move(atoms), z1.truncated_mass);
    }

    const auto l = diversity.bands();
    const double lg = detail::log_gamma_rate(alpha, l);
    const auto z2 = poisson_window(static_cast<double>(l - 1) * t, trunc);
    atoms.reserve(z1.pmf.size() * z2.pmf.size());
    long double kept = 0.0L;
    for (std::size_t a = 0; a < z1.pmf.size(); ++a) {
        const auto n1 = static_cast<double>(z1.first + a);
        for (std::size_t b = 0; b < z2.pmf.size(); ++b) {
            const auto n2 = static_cast<double>(z2.first + b);
            const double p = z1.pmf[a] * z2.pmf[b];
            kept += p;
            detail::add_atom(atoms, n1 * log_alpha - (n1 + n2) * lg, p);
        }
    }
    const double lost = 1.0 - (1.0 - z1.truncated_mass) * (1.0 - z2.truncated_mass);
    return detail::merge_atoms(std::move(atoms), lost);
}

/// Random-coding achievability bound on the optimal error probability with M messages:
/// E[1 - (1 - min{alpha^{-Z1} gamma^{Z1 + Z2}, 1})^{(M + 1)/2}].
/// The truncated tail is counted with integrand 1, so the value stays an upper bound.
inline double random_coding_error_bound(const Diversity& diversity, double alpha, double t, std::uint64_t messages,
                                        const PoissonTruncation& trunc = PoissonTruncation{})
{
    detail::require(diversity.is_finite(), ErrorCode::unsupported,
                    "random-coding bound is defined for finite L only");
    detail::check_alpha(alpha);
    detail::check_duration(t);
    detail::require(messages >= 1, ErrorCode::invalid_input, "M must be >= 1");
    const auto l = diversity.bands();
    const double lg = detail::log_gamma_rate(alpha, l);
    const double log_alpha = alpha == 0.0 ? 0.0 : std::log(alpha);
    const double exponent = (static_cast<double>(messages) + 1.0) / 2.0;

    const auto z1 = poisson_window(alpha * t, trunc);
    const auto z2 = poisson_window(static_cast<double>(l - 1) * t, trunc);
    long double sum = 0.0L;
    for (std::size_t a = 0; a < z1.pmf.size(); ++a) {
        const auto n1 = static_cast<double>(z1.first + a);
        for (std::size_t b = 0; b < z2.pmf.size(); ++b) {
            const auto n2 = static_cast<double>(z2.first + b);
            double f;
            if (alpha == 0.0 && n1 > 0.0) {
                f = 1.0;
            } else {
                const double log_u = std::min(0.0, -n1 * log_alpha + (n1 + n2) * lg);
                f = log_u == 0.0 ? 1.0 : -std::expm1(exponent * std::log1p(-std::exp(log_u)));
            }
            sum += static_cast<long double>(z1.pmf[a]) * z2.pmf[b] * f;
        }
    }
    const double lost = 1.0 - (1.0 - z1.truncated_mass) * (1.0 - z2.truncated_mass);
    return std::min(1.0, static_cast<double>(sum) + lost);
}

/// Closed-form optimal error for unlimited diversity and full blocking:
/// 1 - e^T M^{-1} (1 - (1 - e^{-T})^M). T = 0 gives 1 - 1/M.
inline double optimal_error_perfect(double t, double messages)
{
    detail::require(t >= 0.0 && std::isfinite(t), ErrorCode::domain, "T must be finite and >= 0");
    detail::require(messages >= 1.0, ErrorCode::invalid_input, "M must be >= 1");
    if (messages == 1.0) return 0.0;
    const double log_correct = t - std::log(messages) + detail::log1m_pow_1m_exp(t, messages);
    return std::clamp(-std::expm1(log_correct), 0.0, 1.0);
}

/// Correct-decoding probability of the closed form above.
inline double correct_probability_perfect(double t, double messages)
{
    if (messages == 1.0) return 1.0;
    return std::exp(t - std::log(messages) + detail::log1m_pow_1m_exp(t, messages));
}

/// Monte Carlo of the optimal-decoder experiment for L >= M: a uniform message
/// k0 has count Z_k0 ~ Poi(alpha T), the others Poi(T); decoded index = argmin
/// (argmax when alpha > 1) with ties broken by `rule`. Estimates P(decoded != k0).
inline Estimate optimal_error_monte_carlo(double alpha, double t, std::uint64_t messages, std::uint64_t trials,
                                          std::uint64_t seed, TieRule rule = TieRule::uniform)
{
    detail::check_alpha(alpha);
    detail::require(t >= 0.0 && std::isfinite(t), ErrorCode::domain, "T must be finite and >= 0");
    detail::require(messages >= 1, ErrorCode::invalid_input, "M must be >= 1");
    const bool maximise = alpha > 1.0;
    return run_trials(trials, seed, [&](std::uint64_t trial_seed) {
        Engine eng(trial_seed);
        const auto sent = std::uniform_int_distribution<std::uint64_t>(1, messages)(eng);
        std::vector<std::uint64_t> z(messages);
        for (std::uint64_t k = 1; k <= messages; ++k) z[k - 1] = poisson_draw(eng, k == sent ? alpha * t : t);
        return pick_extremal(z, maximise, rule, eng()) != sent ? 1.0 : 0.0;
    });
}

/// Optimal error probability for L >= M and alpha in [0, 1]. Exact for alpha = 0;
/// otherwise a Monte Carlo estimate with its standard error.
struct OptimalError {
    double value = 0.0;
    double stderr_ = 0.0;
    std::uint64_t trials = 0; ///< 0 when exact
    bool exact = true;
};

inline OptimalError optimal_error_exact(double alpha, double t, std::uint64_t messages, std::uint64_t trials = 100000,
                                        std::uint64_t seed = 1)
{
    detail::require(messages >= 1, ErrorCode::invalid_input, "M must be >= 1");
    detail::require(alpha >= 0.0 && alpha <= 1.0, ErrorCode::domain,
                    "alpha must lie in [0, 1] for the exact optimum, got " + std::to_string(alpha));
    detail::require(t >= 0.0 && std::isfinite(t), ErrorCode::domain, "T must be finite and >= 0");
    if (messages == 1) return {0.0, 0.0, 0, true};
    if (alpha == 0.0 || t == 0.0) {
        if (t == 0.0) return {1.0 - 1.0 / static_cast<double>(messages), 0.0, 0, true};
        return {optimal_error_perfect(t, static_cast<double>(messages)), 0.0, 0, true};
    }
    const auto e = optimal_error_monte_carlo(alpha, t, messages, trials, seed);
    return {e.value, e.stderr_, e.trials, false};
}

/// Largest M with optimal_error_perfect(T, M) <= eps; exponential then binary search.
inline std::uint64_t m_star_perfect(double t, double eps)
{
    detail::require(eps > 0.0 && eps < 1.0, ErrorCode::domain, "eps must lie in (0, 1), got " + std::to_string(eps));
    detail::require(t >= 0.0 && std::isfinite(t), ErrorCode::domain, "T must be finite and >= 0");
    auto ok = [&](std::uint64_t m) { return optimal_error_perfect(t, static_cast<double>(m)) <= eps; };
    constexpr std::uint64_t cap = std::uint64_t{1} << 62;
    std::uint64_t lo = 1; // ok(1) always holds
    std::uint64_t hi = 2;
    while (ok(hi)) {
        detail::require(hi < cap, ErrorCode::domain, "M* exceeds 2^62; T too large");
        lo = hi;
        hi *= 2;
    }
    while (hi - lo > 1) {
        const std::uint64_t mid = lo + (hi - lo) / 2;
        (ok(mid) ? lo : hi) = mid;
    }
    return lo;
}

/// ln M*(T, eps) - max{T - ln(1/eps), 0}; lies in [0, 2] for eps <= 1/12.
inline double m_star_slack(double t, double eps)
{
    return std::log(static_cast<double>(m_star_perfect(t, eps))) - std::max(t - std::log(1.0 / eps), 0.0);
}

/// Error exponent 1 - R of the perfect channel at rate R in (0, 1).
inline double error_exponent(double rate)
{
    detail::require(rate > 0.0 && rate < 1.0, ErrorCode::domain, "R must lie in (0, 1), got " + std::to_string(rate));
    return 1.0 - rate;
}

/// -ln eps*(T, ceil(e^{R T})) / T, the finite-T estimate of the exponent.
inline double empirical_exponent(double t, double rate)
{
    detail::require(rate > 0.0 && rate < 1.0, ErrorCode::domain, "R must lie in (0, 1)");
    detail::check_duration(t);
    const double m = std::ceil(std::exp(rate * t));
    return -std::log(optimal_error_perfect(t, m)) / t;
}

/// Normal approximation C T - sqrt(V T) Q^{-1}(eps) of ln M*.
inline double gaussian_approx_log_m(const Diversity& diversity, double alpha, double t, double eps)
{
    detail::check_duration(t);
    detail::require(eps > 0.0 && eps < 1.0, ErrorCode::domain, "eps must lie in (0, 1)");
    const double c = capacity(diversity, alpha);
    const double v = dispersion(diversity, alpha);
    return c * t - (v == 0.0 ? 0.0 : std::sqrt(v * t) * inverse_q(eps));
}

struct IdentificationErrors {
    double false_accept = 0.0;
    double false_reject = 0.0;
};

/// Identification by thresholding the own-band count Y at cT: accept iff
/// Y <= cT (alpha < 1) or Y >= cT (alpha > 1).
inline IdentificationErrors identification_errors(const Diversity& /*diversity*/, double alpha, double t, double c)
{
    detail::check_alpha(alpha);
    detail::check_duration(t);
    detail::require(alpha != 1.0, ErrorCode::unsupported, "identification is impossible at alpha = 1");
    detail::require(c >= 0.0, ErrorCode::domain, "threshold c must be >= 0, got " + std::to_string(c));
    const double threshold = c * t;
    if (alpha < 1.0) return {poisson_cdf_real(threshold, t), 1.0 - poisson_cdf_real(threshold, alpha * t)};

    // Y >= cT  <=>  Y > ceil(cT) - 1.
    auto p_at_least = [&](double mean) {
        if (!std::isfinite(threshold)) return 0.0;
        const double k = std::ceil(threshold);
        return k <= 0.0 ? 1.0 : 1.0 - poisson_cdf_real(k - 1.0, mean);
    };
    return {p_at_least(t), 1.0 - p_at_least(alpha * t)};
}

/// Monte Carlo of the identification test through the channel: disjoint code,
/// question "is the message 1?". False accepts are measured with message 2 sent.
inline std::pair<Estimate, Estimate> identification_monte_carlo(const ChannelParams& params, double c,
                                                                std::uint64_t trials, std::uint64_t seed)
{
    detail::require(params.alpha() != 1.0, ErrorCode::unsupported, "identification is impossible at alpha = 1");
    const auto code = Codebook::disjoint(params, 2);
    const double threshold = c * params.duration();
    const bool amplify = params.alpha() > 1.0;
    auto accepts = [&](std::uint64_t y) {
        const auto v = static_cast<double>(y);
        return amplify ? v >= threshold : v <= threshold;
    };
    const auto est = run_trials_n<2>(trials, seed, [&](std::uint64_t trial_seed) {
        const auto wrong = sample_output(params, code.signal(2), {1}, derive_seed(trial_seed, {0}));
        const auto right = sample_output(params, code.signal(1), {1}, derive_seed(trial_seed, {1}));
        const auto y_wrong = count_in_own_band(wrong, code.signal(1));
        const auto y_right = count_in_own_band(right, code.signal(1));
        return std::array<double, 2>{accepts(y_wrong) ? 1.0 : 0.0, accepts(y_right) ? 0.0 : 1.0};
    });
    return {est[0], est[1]};
}

/// Bounds (lower, upper) on the correct probability e^T M^{-1} (1 - (1 - e^{-T})^M)
/// with delta = T - ln M >= 0 and T >= 1.
inline std::pair<double, double> correctness_sandwich(double t, double messages)
{
    detail::require(t >= 1.0, ErrorCode::domain, "correctness sandwich needs T >= 1, got " + std::to_string(t));
    detail::require(messages >= 1.0, ErrorCode::invalid_input, "M must be >= 1");
    const double delta = t - std::log(messages);
    detail::require(delta >= 0.0, ErrorCode::domain, "correctness sandwich needs ln M <= T");
    const double ed = std::exp(-delta);
    return {1.0 - ed / 2.0, 1.0 - 0.5 * ed * (1.0 - ed / 2.0) + std::exp(-t)};
}

} // namespace ocpc
