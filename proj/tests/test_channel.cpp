#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include <ocpc/channel.hpp>
#include <ocpc/monte_carlo.hpp>

using namespace ocpc;

namespace {

ErrorCode code_of(auto&& fn)
{
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error thrown";
    return ErrorCode::invariant_violation;
}

// Events of `band` that fall in [a, b).
std::uint64_t count_between(const ChannelOutput& out, Band band, double a, double b)
{
    std::uint64_t n = 0;
    for (double t : out.events(band)) n += (t >= a && t < b) ? 1 : 0;
    return n;
}

} // namespace

TEST(Diversity, ParseAndValidate)
{
    EXPECT_TRUE(Diversity::parse("inf").is_infinite());
    EXPECT_TRUE(Diversity::parse("infinite").is_infinite());
    EXPECT_EQ(Diversity::parse("3").bands(), 3u);
    EXPECT_EQ(code_of([] { Diversity::parse("1"); }), ErrorCode::domain);
    EXPECT_EQ(code_of([] { Diversity::parse("two"); }), ErrorCode::invalid_input);
    EXPECT_EQ(code_of([] { Diversity::parse("3.5"); }), ErrorCode::invalid_input);
    EXPECT_EQ(code_of([] { Diversity::finite(0); }), ErrorCode::domain);
    EXPECT_EQ(Diversity::infinite().to_string(), "inf");
}

TEST(ChannelParams, Validation)
{
    EXPECT_EQ(code_of([] { ChannelParams(Diversity::finite(2), -0.1, 1.0); }), ErrorCode::domain);
    EXPECT_EQ(code_of([] { ChannelParams(Diversity::finite(2), 0.5, 0.0); }), ErrorCode::domain);
    const auto p = ChannelParams::perfect(2.0);
    EXPECT_TRUE(p.diversity().is_infinite());
    EXPECT_EQ(p.alpha(), 0.0);
}

TEST(StepSignal, Validation)
{
    EXPECT_EQ(code_of([] { StepSignal({0.0, 1.0, 1.0}, {1, 2}); }), ErrorCode::invalid_input);
    EXPECT_EQ(code_of([] { StepSignal({0.5, 1.0}, {1}); }), ErrorCode::invalid_input);
    EXPECT_EQ(code_of([] { StepSignal({0.0, 1.0}, {1, 2}); }), ErrorCode::invalid_input);
    EXPECT_EQ(code_of([] { StepSignal({0.0, 1.0}, {0}); }), ErrorCode::invalid_band);
    const StepSignal s({0.0, 1.0, 2.0}, {1, 2});
    EXPECT_EQ(s.band_at(0.0), 1u);
    EXPECT_EQ(s.band_at(1.0), 2u); // left-closed segments
    EXPECT_EQ(s.band_at(2.0), 2u);
}

TEST(SampleOutput, BlockedBandIsSilentAtZeroLeakage)
{
    const auto p = ChannelParams::perfect(3.0);
    const auto x = StepSignal::constant(1, 3.0);
    for (std::uint64_t seed = 0; seed < 2000; ++seed)
        ASSERT_TRUE(sample_output(p, x, {1}, seed).events(1).empty());
}

TEST(SampleOutput, UnblockedBandHasUnitRate)
{
    const auto p = ChannelParams::perfect(3.0);
    const auto x = StepSignal::constant(1, 3.0);
    const auto est = run_trials_n<2>(100000, 5, [&](std::uint64_t s) {
        const double n = static_cast<double>(sample_output(p, x, {2}, s).events(2).size());
        return std::array<double, 2>{n, (n - 3.0) * (n - 3.0)};
    });
    EXPECT_TRUE(est[0].within(3.0)) << est[0].value << " +- " << est[0].stderr_;
    EXPECT_TRUE(est[1].within(3.0)) << est[1].value << " +- " << est[1].stderr_; // Poisson variance = mean
}

TEST(SampleOutput, Deterministic)
{
    const ChannelParams p(Diversity::finite(4), 0.3, 2.0);
    const StepSignal x({0.0, 0.5, 2.0}, {2, 3});
    EXPECT_EQ(sample_output(p, x, {1, 2, 3, 4}, 99), sample_output(p, x, {1, 2, 3, 4}, 99));
    EXPECT_FALSE(sample_output(p, x, {1, 2, 3, 4}, 99) == sample_output(p, x, {1, 2, 3, 4}, 100));
}

TEST(SampleOutput, EventTimesSortedInRange)
{
    const ChannelParams p(Diversity::finite(3), 2.0, 1.5);
    const StepSignal x({0.0, 0.5, 1.0, 1.5}, {1, 2, 3});
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const auto out = sample_output(p, x, {1, 2, 3}, seed);
        for (Band b = 1; b <= 3; ++b) {
            const auto& t = out.events(b);
            ASSERT_TRUE(std::is_sorted(t.begin(), t.end()));
            for (double v : t) ASSERT_TRUE(v >= 0.0 && v <= 1.5);
        }
    }
}

TEST(SampleOutput, InvalidBandRejected)
{
    const ChannelParams p(Diversity::finite(2), 0.0, 1.0);
    EXPECT_EQ(code_of([&] { sample_output(p, StepSignal::constant(1, 1.0), {3}, 1); }), ErrorCode::invalid_band);
    EXPECT_EQ(code_of([&] { sample_output(p, StepSignal::constant(3, 1.0), {1}, 1); }), ErrorCode::invalid_band);
    EXPECT_EQ(code_of([&] { sample_output(p, StepSignal::constant(1, 2.0), {1}, 1); }), ErrorCode::invalid_input);
}

TEST(SampleOutput, BlockedRegionCountIsPoissonAlphaT)
{
    const ChannelParams p(Diversity::finite(3), 0.4, 2.5);
    const StepSignal x({0.0, 0.7, 1.1, 2.5}, {1, 3, 1});
    const auto est = run_trials(100000, 8, [&](std::uint64_t s) {
        return static_cast<double>(count_in_own_band(sample_output(p, x, {1, 3}, s), x));
    });
    EXPECT_TRUE(est.within(0.4 * 2.5)) << est.value << " +- " << est.stderr_;
}

TEST(SampleOutput, DisjointIntervalsUncorrelated)
{
    const auto p = ChannelParams::perfect(2.0);
    const auto x = StepSignal::constant(1, 2.0);
    // E[N(0,1) N(1,2)] = 1 for independent unit-rate counts.
    const auto est = run_trials(100000, 21, [&](std::uint64_t s) {
        const auto out = sample_output(p, x, {2}, s);
        return static_cast<double>(count_between(out, 2, 0.0, 1.0) * count_between(out, 2, 1.0, 2.0));
    });
    EXPECT_TRUE(est.within(1.0)) << est.value << " +- " << est.stderr_;
}

TEST(CountInOwnBand, HandExample)
{
    ChannelOutput out(ChannelParams::perfect(2.0));
    out.set_events(1, {0.5});
    out.set_events(2, {1.5});
    EXPECT_EQ(count_in_own_band(out, StepSignal::constant(1, 2.0)), 1u);
    EXPECT_EQ(count_in_own_band(out, StepSignal({0.0, 1.0, 2.0}, {1, 2})), 2u);
    EXPECT_EQ(count_in_own_band(out, StepSignal({0.0, 1.0, 2.0}, {2, 1})), 0u);
}

TEST(CountInOwnBand, MissingBand)
{
    ChannelOutput out(ChannelParams::perfect(2.0));
    out.set_events(1, {0.5});
    EXPECT_EQ(code_of([&] { count_in_own_band(out, StepSignal::constant(2, 2.0)); }), ErrorCode::missing_band);
}

TEST(CountInOwnBand, ZeroUnderOwnSignalAtZeroLeakage)
{
    const ChannelParams p(Diversity::finite(3), 0.0, 4.0);
    const StepSignal x({0.0, 1.0, 2.5, 4.0}, {3, 1, 2});
    for (std::uint64_t seed = 0; seed < 500; ++seed)
        ASSERT_EQ(count_in_own_band(sample_output(p, x, {1, 2, 3}, seed), x), 0u);
}

TEST(CountInOwnBand, NoLeakageGivesPoissonT)
{
    const ChannelParams p(Diversity::finite(2), 1.0, 4.0);
    const auto x = StepSignal::constant(1, 4.0);
    const auto est = run_trials(100000, 4, [&](std::uint64_t s) {
        return static_cast<double>(count_in_own_band(sample_output(p, x, {1}, s), x));
    });
    EXPECT_TRUE(est.within(4.0)) << est.value << " +- " << est.stderr_;
}

TEST(CountInOwnBand, InvariantUnderBandPermutation)
{
    const ChannelParams p(Diversity::finite(4), 0.5, 3.0);
    const StepSignal x({0.0, 1.0, 2.0, 3.0}, {1, 2, 4});
    const std::map<Band, Band> perm{{1, 3}, {2, 1}, {3, 4}, {4, 2}};
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const auto out = sample_output(p, x, {1, 2, 3, 4}, seed);
        ChannelOutput moved(p);
        for (const auto& [b, times] : out.all_events()) moved.set_events(perm.at(b), times);
        const auto y = x.relabeled([&](Band b) { return perm.at(b); });
        ASSERT_EQ(count_in_own_band(out, x), count_in_own_band(moved, y));
    }
}

TEST(Decoder, SingleMessage)
{
    const ChannelParams p(Diversity::finite(2), 0.3, 1.0);
    const auto code = Codebook::disjoint(p, 1);
    for (std::uint64_t seed = 0; seed < 50; ++seed)
        EXPECT_EQ(decode_count_rule(sample_output(p, code.signal(1), {1}, seed), code, seed), 1u);
}

TEST(Decoder, TrueMessageHasZeroCountAtZeroLeakage)
{
    const auto p = ChannelParams::perfect(1.0);
    const auto code = Codebook::disjoint(p, 5);
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        const MessageIndex k0 = 1 + seed % 5;
        const auto out = sample_output(p, code.signal(k0), code.bands_used(), seed);
        const auto k = decode_count_rule(out, code, seed);
        ASSERT_EQ(count_in_own_band(out, code.signal(k)), 0u);
    }
}

TEST(Decoder, TiesBrokenUniformly)
{
    ChannelOutput out(ChannelParams::perfect(1.0));
    for (Band b = 1; b <= 4; ++b) out.set_events(b, {0.25});
    const auto code = Codebook::disjoint(ChannelParams::perfect(1.0), 4);
    std::array<int, 4> hits{};
    const int n = 40000;
    for (int s = 0; s < n; ++s) ++hits.at(decode_count_rule(out, code, static_cast<std::uint64_t>(s)) - 1);
    const double sd = std::sqrt(0.25 * 0.75 / n);
    for (int h : hits) EXPECT_NEAR(h / static_cast<double>(n), 0.25, 3.0 * sd);
    EXPECT_EQ(decode_count_rule(out, code, 0, TieRule::lowest), 1u);
}

TEST(Decoder, ArgmaxAboveUnitLeakage)
{
    const ChannelParams p(Diversity::finite(3), 5.0, 1.0);
    ChannelOutput out(p);
    out.set_events(1, {0.1});
    out.set_events(2, {0.1, 0.2, 0.3});
    out.set_events(3, {});
    EXPECT_EQ(decode_count_rule(out, Codebook::disjoint(p, 3), 0), 2u);
}

TEST(Codebook, Validation)
{
    const ChannelParams p(Diversity::finite(2), 0.0, 1.0);
    EXPECT_EQ(code_of([&] { Codebook(p, {}); }), ErrorCode::invalid_input);
    EXPECT_EQ(code_of([&] { Codebook::disjoint(p, 3); }), ErrorCode::invalid_band);
}

TEST(ChannelOutput, JsonRoundTrip)
{
    const ChannelParams p(Diversity::finite(3), 0.25, 2.0);
    const auto out = sample_output(p, StepSignal({0.0, 1.0, 2.0}, {1, 3}), {1, 2, 3}, 17);
    const auto j = to_json(out);
    EXPECT_EQ(j["duration"], 2.0);
    EXPECT_EQ(j["alpha"], 0.25);
    ASSERT_TRUE(j["bands"].contains("2"));
    EXPECT_EQ(channel_output_from_json(nlohmann::json::parse(j.dump()), Diversity::finite(3)), out);
}

TEST(ChannelOutput, RejectsBadEvents)
{
    ChannelOutput out(ChannelParams(Diversity::finite(2), 0.0, 1.0));
    EXPECT_EQ(code_of([&] { out.set_events(1, {1.5}); }), ErrorCode::invalid_input);
    EXPECT_EQ(code_of([&] { out.set_events(1, {0.2, 0.2}); }), ErrorCode::invalid_input);
    EXPECT_EQ(code_of([&] { out.set_events(3, {0.2}); }), ErrorCode::invalid_band);
    EXPECT_EQ(code_of([] { channel_output_from_json(nlohmann::json::parse(R"({"duration":1})")); }),
              ErrorCode::invalid_input);
}
