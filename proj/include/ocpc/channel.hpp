#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "random.hpp"

namespace ocpc {

using Band = std::uint64_t;         ///< 1-based band index.
using MessageIndex = std::uint64_t; ///< 1-based message index.

/// Number of bands: a finite L >= 2, or unlimited.
class Diversity {
public:
    static Diversity finite(std::uint64_t bands)
    {
        detail::require(bands >= 2, ErrorCode::domain, "diversity L must be >= 2, got " + std::to_string(bands));
        return Diversity(bands);
    }
    static Diversity infinite() noexcept { return Diversity(std::nullopt); }

    /// Accepts "inf" / "infinite" / "∞" or an integer >= 2.
    static Diversity parse(const std::string& text)
    {
        if (text == "inf" || text == "infinite" || text == "∞") return infinite();
        std::size_t used = 0;
        long long value = 0;
        try {
            value = std::stoll(text, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        detail::require(used == text.size() && used > 0, ErrorCode::invalid_input,
                        "L must be an integer >= 2 or 'inf', got '" + text + "'");
        detail::require(value >= 2, ErrorCode::domain, "L must be >= 2, got " + text);
        return finite(static_cast<std::uint64_t>(value));
    }

    bool is_infinite() const noexcept { return !bands_.has_value(); }
    bool is_finite() const noexcept { return bands_.has_value(); }

    std::uint64_t bands() const
    {
        detail::require(bands_.has_value(), ErrorCode::unsupported, "diversity is infinite");
        return *bands_;
    }

    /// Largest usable band index.
    std::uint64_t max_band() const noexcept
    {
        return bands_.value_or(std::numeric_limits<std::uint64_t>::max());
    }

    std::string to_string() const { return bands_ ? std::to_string(*bands_) : "inf"; }

    friend bool operator==(const Diversity&, const Diversity&) = default;

private:
    explicit Diversity(std::optional<std::uint64_t> bands) noexcept : bands_(bands) {}
    std::optional<std::uint64_t> bands_;
};

/// One channel instance: diversity, leakage and duration.
class ChannelParams {
public:
    ChannelParams(Diversity diversity, double alpha, double duration)
        : diversity_(diversity), alpha_(alpha), duration_(duration)
    {
        detail::require(alpha >= 0.0 && std::isfinite(alpha), ErrorCode::domain,
                        "alpha must be finite and >= 0, got " + std::to_string(alpha));
        detail::require(duration > 0.0 && std::isfinite(duration), ErrorCode::domain,
                        "duration T must be finite and > 0, got " + std::to_string(duration));
    }

    static ChannelParams perfect(double duration) { return {Diversity::infinite(), 0.0, duration}; }

    const Diversity& diversity() const noexcept { return diversity_; }
    double alpha() const noexcept { return alpha_; }
    double duration() const noexcept { return duration_; }

    /// Intensity of band `band` at a time when band `blocked` is attenuated.
    double rate(Band band, Band blocked) const noexcept { return band == blocked ? alpha_ : 1.0; }

    void check_band(Band band) const
    {
        detail::require(band >= 1 && band <= diversity_.max_band(), ErrorCode::invalid_band,
                        "band " + std::to_string(band) + " outside [1, " + diversity_.to_string() + "]");
    }

private:
    Diversity diversity_;
    double alpha_;
    double duration_;
};

/// Piecewise-constant input: band `bands[j]` is attenuated on [t_j, t_{j+1}).
class StepSignal {
public:
    StepSignal(std::vector<double> breakpoints, std::vector<Band> bands)
        : breakpoints_(std::move(breakpoints)), bands_(std::move(bands))
    {
        detail::require(breakpoints_.size() >= 2, ErrorCode::invalid_input, "signal needs at least one segment");
        detail::require(breakpoints_.front() == 0.0, ErrorCode::invalid_input, "signal must start at t = 0");
        detail::require(bands_.size() + 1 == breakpoints_.size(), ErrorCode::invalid_input,
                        "signal needs exactly one band per segment");
        for (std::size_t j = 1; j < breakpoints_.size(); ++j)
            detail::require(breakpoints_[j] > breakpoints_[j - 1] && std::isfinite(breakpoints_[j]),
                            ErrorCode::invalid_input, "signal breakpoints must be strictly increasing");
        for (Band b : bands_) detail::require(b >= 1, ErrorCode::invalid_band, "band indices are 1-based");
    }

    static StepSignal constant(Band band, double duration) { return StepSignal({0.0, duration}, {band}); }

    /// Equal-length segments, one per entry of `bands`.
    static StepSignal uniform_segments(const std::vector<Band>& bands, double duration)
    {
        detail::require(!bands.empty(), ErrorCode::invalid_input, "signal needs at least one segment");
        std::vector<double> bp(bands.size() + 1);
        for (std::size_t j = 0; j <= bands.size(); ++j)
            bp[j] = duration * static_cast<double>(j) / static_cast<double>(bands.size());
        bp.back() = duration;
        return StepSignal(std::move(bp), bands);
    }

    double duration() const noexcept { return breakpoints_.back(); }
    std::size_t segments() const noexcept { return bands_.size(); }
    const std::vector<double>& breakpoints() const noexcept { return breakpoints_; }
    const std::vector<Band>& bands() const noexcept { return bands_; }
    double segment_begin(std::size_t j) const { return breakpoints_[j]; }
    double segment_end(std::size_t j) const { return breakpoints_[j + 1]; }
    Band segment_band(std::size_t j) const { return bands_[j]; }

    Band band_at(double t) const
    {
        auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), t);
        std::size_t j = it == breakpoints_.begin() ? 0 : static_cast<std::size_t>(it - breakpoints_.begin()) - 1;
        return bands_[std::min(j, bands_.size() - 1)];
    }

    std::set<Band> bands_used() const { return {bands_.begin(), bands_.end()}; }

    /// Relabels bands with `relabel(b)`.
    template <class F>
    StepSignal relabeled(F&& relabel) const
    {
        std::vector<Band> b(bands_.size());
        std::transform(bands_.begin(), bands_.end(), b.begin(), relabel);
        return StepSignal(breakpoints_, std::move(b));
    }

private:
    std::vector<double> breakpoints_;
    std::vector<Band> bands_;
};

namespace detail {

inline bool same_duration(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a)); }

inline void check_signal(const ChannelParams& params, const StepSignal& signal)
{
    require(same_duration(signal.duration(), params.duration()), ErrorCode::invalid_input,
            "signal duration " + std::to_string(signal.duration()) + " differs from T = " +
                std::to_string(params.duration()));
    for (Band b : signal.bands()) params.check_band(b);
}

} // namespace detail

/// Sampled event times per materialised band. Bands that were never
/// requested are absent; for infinite diversity they are i.i.d. unit-rate
/// processes and irrelevant to every decoder here.
class ChannelOutput {
public:
    explicit ChannelOutput(ChannelParams params) : params_(params) {}

    const ChannelParams& params() const noexcept { return params_; }
    double duration() const noexcept { return params_.duration(); }

    bool has_band(Band band) const { return events_.contains(band); }

    const std::vector<double>& events(Band band) const
    {
        auto it = events_.find(band);
        detail::require(it != events_.end(), ErrorCode::missing_band,
                        "band " + std::to_string(band) + " was not materialised");
        return it->second;
    }

    /// Replaces the events of `band`; times are sorted and must lie in [0, T].
    void set_events(Band band, std::vector<double> times)
    {
        params_.check_band(band);
        std::sort(times.begin(), times.end());
        for (std::size_t i = 0; i < times.size(); ++i) {
            detail::require(times[i] >= 0.0 && times[i] <= duration(), ErrorCode::invalid_input,
                            "event time outside [0, T] in band " + std::to_string(band));
            detail::require(i == 0 || times[i] > times[i - 1], ErrorCode::invalid_input,
                            "duplicate event time in band " + std::to_string(band));
        }
        events_[band] = std::move(times);
    }

    void set_sorted_events(Band band, std::vector<double> times) { events_[band] = std::move(times); }

    const std::map<Band, std::vector<double>>& all_events() const noexcept { return events_; }

    std::uint64_t total_events() const
    {
        std::uint64_t n = 0;
        for (const auto& [band, times] : events_) n += times.size();
        return n;
    }

    friend bool operator==(const ChannelOutput& a, const ChannelOutput& b)
    {
        return a.events_ == b.events_ && a.duration() == b.duration() && a.params_.alpha() == b.params_.alpha();
    }

private:
    ChannelParams params_;
    std::map<Band, std::vector<double>> events_;
};

/// Serialises as {"duration": T, "alpha": a, "bands": {"1": [t, ...], ...}}.
inline nlohmann::json to_json(const ChannelOutput& out)
{
    nlohmann::json bands = nlohmann::json::object();
    for (const auto& [band, times] : out.all_events()) bands[std::to_string(band)] = times;
    return {{"duration", out.duration()}, {"alpha", out.params().alpha()}, {"bands", bands}};
}

/// Inverse of to_json. The JSON shape does not carry the diversity, so the caller supplies it.
inline ChannelOutput channel_output_from_json(const nlohmann::json& j, Diversity diversity = Diversity::infinite())
{
    try {
        ChannelOutput out(ChannelParams(diversity, j.at("alpha").get<double>(), j.at("duration").get<double>()));
        for (const auto& [key, times] : j.at("bands").items()) {
            std::size_t used = 0;
            const auto band = std::stoull(key, &used);
            detail::require(used == key.size(), ErrorCode::invalid_input, "band key '" + key + "' is not an integer");
            out.set_events(band, times.get<std::vector<double>>());
        }
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::invalid_input, std::string("malformed channel output JSON: ") + e.what());
    } catch (const std::logic_error& e) {
        throw Error(ErrorCode::invalid_input, std::string("malformed channel output JSON: ") + e.what());
    }
}

/// M input signals over one channel.
class Codebook {
public:
    Codebook(ChannelParams params, std::vector<StepSignal> signals) : params_(params), signals_(std::move(signals))
    {
        detail::require(!signals_.empty(), ErrorCode::invalid_input, "codebook must hold at least one signal");
        for (const auto& s : signals_) detail::check_signal(params_, s);
    }

    /// The optimal code for L >= M: message k blocks band k for the whole duration.
    static Codebook disjoint(ChannelParams params, std::uint64_t messages)
    {
        detail::require(messages >= 1, ErrorCode::invalid_input, "M must be >= 1");
        detail::require(messages <= params.diversity().max_band(), ErrorCode::invalid_band,
                        "disjoint codebook needs L >= M");
        std::vector<StepSignal> s;
        s.reserve(messages);
        for (std::uint64_t k = 1; k <= messages; ++k) s.push_back(StepSignal::constant(k, params.duration()));
        return Codebook(params, std::move(s));
    }

    const ChannelParams& params() const noexcept { return params_; }
    std::uint64_t size() const noexcept { return signals_.size(); }
    const StepSignal& signal(MessageIndex k) const { return signals_.at(k - 1); }
    const std::vector<StepSignal>& signals() const noexcept { return signals_; }

    std::set<Band> bands_used() const
    {
        std::set<Band> out;
        for (const auto& s : signals_) out.merge(s.bands_used());
        return out;
    }

private:
    ChannelParams params_;
    std::vector<StepSignal> signals_;
};

/// Homogeneous events of the given rate on [begin, end), sorted, appended to `times`.
inline void append_poisson_events(Engine& eng, double rate, double begin, double end, std::vector<double>& times)
{
    const auto n = poisson_draw(eng, rate * (end - begin));
    const auto first = times.size();
    std::uniform_real_distribution<double> where(begin, end);
    for (std::uint64_t i = 0; i < n; ++i) times.push_back(where(eng));
    std::sort(times.begin() + static_cast<std::ptrdiff_t>(first), times.end());
}

/// Exact sample of the requested bands under input `signal`. Each
/// (band, segment) pair draws from its own substream of `seed`.
inline ChannelOutput sample_output(const ChannelParams& params, const StepSignal& signal,
                                   const std::set<Band>& bands_of_interest, std::uint64_t seed)
{
    detail::check_signal(params, signal);
    detail::require(!bands_of_interest.empty(), ErrorCode::invalid_input, "no bands requested");
    ChannelOutput out(params);
    for (Band band : bands_of_interest) {
        params.check_band(band);
        std::vector<double> times;
        for (std::size_t j = 0; j < signal.segments(); ++j) {
            Engine eng(derive_seed(seed, {stream::channel, band, j}));
            append_poisson_events(eng, params.rate(band, signal.segment_band(j)), signal.segment_begin(j),
                                  signal.segment_end(j), times);
        }
        out.set_sorted_events(band, std::move(times));
    }
    return out;
}

/// Number of events (i, t) with signal(t) = i, i.e. inside the attenuated region.
inline std::uint64_t count_in_own_band(const ChannelOutput& output, const StepSignal& signal)
{
    detail::require(detail::same_duration(output.duration(), signal.duration()), ErrorCode::invalid_input,
                    "signal and output durations differ");
    std::uint64_t count = 0;
    for (std::size_t j = 0; j < signal.segments(); ++j) {
        const auto& times = output.events(signal.segment_band(j));
        const auto lo = std::lower_bound(times.begin(), times.end(), signal.segment_begin(j));
        const auto hi = j + 1 == signal.segments() ? times.end()
                                                   : std::lower_bound(lo, times.end(), signal.segment_end(j));
        count += static_cast<std::uint64_t>(hi - lo);
    }
    return count;
}

/// Tie policy among equally likely messages.
enum class TieRule {
    uniform, ///< uniform among tied indices
    lowest,  ///< smallest tied index
};

/// Picks an index among the extremal entries of `scores` (min or max).
inline MessageIndex pick_extremal(const std::vector<std::uint64_t>& scores, bool maximise, TieRule rule,
                                  std::uint64_t tiebreak_seed)
{
    detail::require(!scores.empty(), ErrorCode::invalid_input, "empty candidate list");
    const auto best = maximise ? *std::max_element(scores.begin(), scores.end())
                               : *std::min_element(scores.begin(), scores.end());
    std::vector<MessageIndex> tied;
    for (std::size_t k = 0; k < scores.size(); ++k)
        if (scores[k] == best) tied.push_back(k + 1);
    if (tied.size() == 1 || rule == TieRule::lowest) return tied.front();
    Engine eng(derive_seed(tiebreak_seed, {stream::tiebreak}));
    return tied[std::uniform_int_distribution<std::size_t>(0, tied.size() - 1)(eng)];
}

/// Maximum-likelihood decoder: the message whose attenuated region holds the
/// fewest events (alpha <= 1) or the most (alpha > 1).
inline MessageIndex decode_count_rule(const ChannelOutput& output, const Codebook& codebook,
                                      std::uint64_t tiebreak_seed, TieRule rule = TieRule::uniform)
{
    std::vector<std::uint64_t> counts;
    counts.reserve(codebook.size());
    for (const auto& s : codebook.signals()) counts.push_back(count_in_own_band(output, s));
    return pick_extremal(counts, codebook.params().alpha() > 1.0, rule, tiebreak_seed);
}

} // namespace ocpc
