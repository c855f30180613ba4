#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <string>

#include "channel.hpp"
#include "coding.hpp"
#include "error.hpp"
#include "poisson.hpp"
#include "random.hpp"

namespace ocpc {

/// Common randomness shared by encoder and decoder: an indexed family of
/// i.i.d. banks, each a set of homogeneous Poisson processes of rate `rate`
/// on [0, T]. Bank k, band i is regenerated from (seed, k, i) alone.
class RandomnessBank {
public:
    RandomnessBank(std::uint64_t seed, double rate, double duration, std::optional<std::uint64_t> banks = std::nullopt)
        : seed_(seed), rate_(rate), duration_(duration), banks_(banks)
    {
        detail::require(rate >= 0.0 && std::isfinite(rate), ErrorCode::domain, "bank rate must be >= 0");
        detail::require(duration > 0.0, ErrorCode::domain, "bank duration must be > 0");
    }

    std::uint64_t seed() const noexcept { return seed_; }
    double rate() const noexcept { return rate_; }
    double duration() const noexcept { return duration_; }
    std::optional<std::uint64_t> banks() const noexcept { return banks_; }

    ChannelOutput sample(std::uint64_t k, const std::set<Band>& bands, const ChannelParams& params) const
    {
        detail::require(k >= 1 && (!banks_ || k <= *banks_), ErrorCode::invalid_input,
                        "bank index " + std::to_string(k) + " out of range");
        ChannelOutput out(params);
        for (Band band : bands) {
            Engine eng(derive_seed(seed_, {stream::bank, k, band}));
            std::vector<double> times;
            append_poisson_events(eng, rate_, 0.0, duration_, times);
            out.set_sorted_events(band, std::move(times));
        }
        return out;
    }

    /// Arrival times B_1 < B_2 < ... of a unit-rate Poisson process.
    std::vector<double> arrivals(std::uint64_t count) const
    {
        Engine eng(derive_seed(seed_, {stream::arrivals}));
        std::exponential_distribution<double> gap(1.0);
        std::vector<double> b(count);
        double acc = 0.0;
        for (auto& x : b) x = (acc += gap(eng));
        return b;
    }

    /// Extra uniform draw used by a protocol's final decision.
    double decision_uniform() const
    {
        Engine eng(derive_seed(seed_, {stream::arrivals, 1}));
        return uniform01(eng);
    }

private:
    std::uint64_t seed_;
    double rate_;
    double duration_;
    std::optional<std::uint64_t> banks_;
};

enum class Protocol { rejection, poisson_functional };

inline const char* to_string(Protocol p) { return p == Protocol::rejection ? "rejection" : "pfr"; }

struct SimulationOutcome {
    Protocol protocol;
    std::optional<MessageIndex> selected; ///< empty on overflow
    ChannelOutput output;                 ///< decoder output; meaningless when !valid()

    bool overflow() const noexcept { return !selected.has_value(); }
    bool valid() const noexcept { return selected.has_value(); }
};

/// (1 - e^{-T})^M: failure probability of rejection sampling with M banks.
inline double rejection_bound(double t, double messages)
{
    detail::require(t > 0.0 && std::isfinite(t), ErrorCode::domain, "T must be > 0");
    detail::require(messages >= 1.0, ErrorCode::invalid_input, "M must be >= 1");
    return std::exp(messages * std::log1p(-std::exp(-t)));
}

/// ceil(exp(T + ln ln(1/eps) + ln 2)), a message count sufficient for TV distance eps.
inline std::uint64_t m_sim_upper(double t, double eps)
{
    detail::require(t > 0.0 && std::isfinite(t), ErrorCode::domain, "T must be > 0");
    detail::require(eps > 0.0 && eps < std::exp(-1.0), ErrorCode::domain,
                    "eps must lie in (0, 1/e), got " + std::to_string(eps));
    const double log_m = t + std::log(std::log(1.0 / eps)) + std::log(2.0);
    detail::require(log_m < 62.0 * std::log(2.0), ErrorCode::domain, "M exceeds 2^62; T too large");
    return static_cast<std::uint64_t>(std::ceil(std::exp(log_m)));
}

/// Rejection sampling for the perfect channel: the first bank with no event
/// in the blocked region {(i, t) : x(t) = i} is sent and output.
inline SimulationOutcome rejection_simulate(double t, std::uint64_t messages, const StepSignal& signal,
                                            std::uint64_t seed)
{
    detail::require(messages >= 1, ErrorCode::invalid_input, "M must be >= 1");
    const auto params = ChannelParams::perfect(t);
    detail::check_signal(params, signal);
    const RandomnessBank bank(seed, 1.0, t, messages);
    const auto bands = signal.bands_used();
    for (std::uint64_t k = 1; k <= messages; ++k) {
        auto candidate = bank.sample(k, bands, params);
        if (count_in_own_band(candidate, signal) == 0) return {Protocol::rejection, k, std::move(candidate)};
    }
    return {Protocol::rejection, std::nullopt, ChannelOutput(params)};
}

/// Reference rate gamma = 1 + (alpha - 1)/L (1 for unlimited diversity).
inline double reference_rate(const ChannelParams& params)
{
    if (params.diversity().is_infinite()) return 1.0;
    return 1.0 + (params.alpha() - 1.0) / static_cast<double>(params.diversity().bands());
}

/// Log density ratio of the channel law to the reference law, given
/// `blocked` events inside and `unblocked` events outside the attenuated
/// region (all L bands for finite L).
inline double log_ratio_of_counts(const ChannelParams& params, std::uint64_t blocked, std::uint64_t unblocked)
{
    const double a = params.alpha();
    const double t = params.duration();
    const auto nb = static_cast<double>(blocked);
    if (a == 0.0 && blocked > 0) return -std::numeric_limits<double>::infinity();
    const double la = a == 0.0 ? 0.0 : std::log(a);
    if (params.diversity().is_infinite()) return (1.0 - a) * t + nb * la;
    const double g = reference_rate(params);
    const double lg = std::log(g);
    const auto l = static_cast<double>(params.diversity().bands());
    const auto nu = static_cast<double>(unblocked);
    return (g - a) * t + (g - 1.0) * (l - 1.0) * t + (blocked ? nb * (la - lg) : 0.0) - nu * lg;
}

/// Log of dP(channel | signal) / dP(reference) at `candidate`.
inline double likelihood_ratio(const ChannelParams& params, const StepSignal& signal, const ChannelOutput& candidate)
{
    detail::check_signal(params, signal);
    const auto blocked = count_in_own_band(candidate, signal);
    std::uint64_t unblocked = 0;
    if (params.diversity().is_finite()) {
        std::uint64_t total = 0;
        for (Band b = 1; b <= params.diversity().bands(); ++b) total += candidate.events(b).size();
        unblocked = total - blocked;
    }
    return log_ratio_of_counts(params, blocked, unblocked);
}

/// Bands a protocol must materialise: all L for finite diversity, else the signal's bands.
inline std::set<Band> relevant_bands(const ChannelParams& params, const StepSignal& signal)
{
    if (params.diversity().is_infinite()) return signal.bands_used();
    std::set<Band> all;
    for (Band b = 1; b <= params.diversity().bands(); ++b) all.insert(b);
    return all;
}

namespace detail {

/// Expected number of indices k > M with B_k / r_k < score, given B_M:
/// E_ref[(score r - B_M)^+] = E_channel[(score - B_M / r)^+].
inline double pfr_tail_intensity(const ChannelParams& params, double score, double b_m,
                                 const PoissonTruncation& trunc)
{
    const double t = params.duration();
    const auto z1 = poisson_window(params.alpha() * t, trunc);
    const bool finite = params.diversity().is_finite();
    const auto z2 = poisson_window(finite ? static_cast<double>(params.diversity().bands() - 1) * t : 0.0, trunc);
    long double acc = 0.0L;
    for (std::size_t a = 0; a < z1.pmf.size(); ++a)
        for (std::size_t b = 0; b < z2.pmf.size(); ++b) {
            const double lr = log_ratio_of_counts(params, z1.first + a, z2.first + b);
            const double gap = score - b_m * std::exp(-lr);
            if (gap > 0.0) acc += static_cast<long double>(z1.pmf[a]) * z2.pmf[b] * gap;
        }
    return static_cast<double>(acc);
}

} // namespace detail

/// Poisson functional representation: K = argmin_k B_k / ratio_k over
/// reference-law banks, sent when K <= M.
///
/// Candidates 1..M are scanned explicitly. Indices beyond M form a Poisson
/// process of scores independent of the first M, so K > M happens with
/// probability 1 - exp(-Lambda), Lambda the expected number of later scores
/// below the best one; that event is drawn exactly instead of being scanned.
inline SimulationOutcome pfr_simulate(const ChannelParams& params, std::uint64_t messages, const StepSignal& signal,
                                      std::uint64_t seed, const PoissonTruncation& trunc = PoissonTruncation{})
{
    detail::require(messages >= 1, ErrorCode::invalid_input, "M must be >= 1");
    detail::check_signal(params, signal);
    const RandomnessBank bank(seed, reference_rate(params), params.duration());
    const auto bands = relevant_bands(params, signal);
    const auto arrivals = bank.arrivals(messages);

    double best_log_score = std::numeric_limits<double>::infinity();
    std::optional<MessageIndex> best;
    ChannelOutput best_output(params);
    for (std::uint64_t k = 1; k <= messages; ++k) {
        auto candidate = bank.sample(k, bands, params);
        const double lr = likelihood_ratio(params, signal, candidate);
        if (lr == -std::numeric_limits<double>::infinity()) continue;
        const double log_score = std::log(arrivals[k - 1]) - lr;
        if (log_score < best_log_score) {
            best_log_score = log_score;
            best = k;
            best_output = std::move(candidate);
        }
    }
    if (!best) return {Protocol::poisson_functional, std::nullopt, ChannelOutput(params)};

    const double lambda = detail::pfr_tail_intensity(params, std::exp(best_log_score), arrivals.back(), trunc);
    if (lambda > 0.0 && bank.decision_uniform() >= std::exp(-lambda))
        return {Protocol::poisson_functional, std::nullopt, ChannelOutput(params)};
    return {Protocol::poisson_functional, best, std::move(best_output)};
}

/// E[(1 - (1 + r)^{-1})^M] with r the channel-to-reference ratio at
/// Z1 ~ Poi(alpha T) blocked and Z2 ~ Poi((L - 1) T) unblocked events
/// (r = alpha^{Z1} e^{(1 - alpha) T} for unlimited diversity). Truncated
/// tail counted with integrand 1.
inline double pfr_bound(const ChannelParams& params, std::uint64_t messages,
                        const PoissonTruncation& trunc = PoissonTruncation{})
{
    detail::require(messages >= 1, ErrorCode::invalid_input, "M must be >= 1");
    const double t = params.duration();
    const auto z1 = poisson_window(params.alpha() * t, trunc);
    const bool finite = params.diversity().is_finite();
    const auto z2 = poisson_window(finite ? static_cast<double>(params.diversity().bands() - 1) * t : 0.0, trunc);
    const auto m = static_cast<double>(messages);
    long double acc = 0.0L;
    for (std::size_t a = 0; a < z1.pmf.size(); ++a)
        for (std::size_t b = 0; b < z2.pmf.size(); ++b) {
            const double lr = log_ratio_of_counts(params, z1.first + a, z2.first + b);
            const double f = lr == -std::numeric_limits<double>::infinity() ? 0.0
                                                                            : std::exp(-m * std::log1p(std::exp(-lr)));
            acc += static_cast<long double>(z1.pmf[a]) * z2.pmf[b] * f;
        }
    const double lost = 1.0 - (1.0 - z1.truncated_mass) * (1.0 - z2.truncated_mass);
    return std::min(1.0, static_cast<double>(acc) + lost);
}

} // namespace ocpc
