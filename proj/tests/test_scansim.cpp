#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "support/synthetic.hpp"
#include "tcftl/binomial.hpp"
#include "tcftl/errors.hpp"
#include "tcftl/scansim.hpp"

using namespace tcftl;
using tcftl::testing::gaussian_pdf;
using tcftl::testing::pair_of;

namespace {

const CarriagePair kHandHand = pair_of("standing:hand/standing:hand");

StratifiedPdf two_strata() {
    return StratifiedPdf({{"near", 1.0, gaussian_pdf(-55, 2)}, {"far", 1.0, gaussian_pdf(-75, 2)}});
}

LookModel all_chirps(int scans, int per_scan) { return LookModel::correlated(scans, per_scan); }

}  // namespace

TEST(ScanModel, DefaultsAndValidation) {
    ScanModel m;
    EXPECT_EQ(m.chirps_per_scan(), 16);
    EXPECT_EQ(m.scans_per_window, 6);
    m.scan_duration_s = 400;
    EXPECT_THROW(m.validate(), ParameterError);
    ScanModel tiny;
    tiny.chirp_rate_hz = 0.1;
    EXPECT_THROW(tiny.validate(), ParameterError);
    EXPECT_EQ(ScanModel::from_json(ScanModel{}.to_json()).chirps_per_scan(), 16);
}

TEST(SamplingModel, CardinalityPerPolicy) {
    SamplingModel s;
    EXPECT_EQ(s.recorded_per_scan(), 1);
    s.policy = RecordingPolicy::AllChirps;
    EXPECT_EQ(s.recorded_per_scan(), 4);
    s.samples_per_scan = 17;
    EXPECT_THROW(s.validate(ScanModel{}), ParameterError);
    EXPECT_EQ(parse_recording_policy(to_string(RecordingPolicy::MinAttenuation)), RecordingPolicy::MinAttenuation);
    EXPECT_THROW(parse_recording_policy("loudest"), ConfigError);
}

TEST(SimulateWindow, PointMassGivesEqualValuesForEveryPolicy) {
    const auto cell = StratifiedPdf::single(EmpiricalPdf::point_mass(-60));
    for (auto policy : {RecordingPolicy::FirstChirp, RecordingPolicy::AllChirps, RecordingPolicy::MinAttenuation}) {
        LookModel m;
        m.sampling.policy = policy;
        for (int v : simulate_window(m, cell, 3)) EXPECT_EQ(v, -60);
    }
}

TEST(SimulateWindow, PolicyCardinality) {
    const auto bank = tcftl::testing::synthetic_bank(tcftl::testing::two_states(), 5);
    LookModel first;
    EXPECT_EQ(simulate_window(first, bank, 3, kHandHand, 1).size(), 6u);
    EXPECT_EQ(simulate_window(all_chirps(6, 4), bank, 3, kHandHand, 1).size(), 24u);
    LookModel minatt;
    minatt.sampling.policy = RecordingPolicy::MinAttenuation;
    EXPECT_EQ(simulate_window(minatt, bank, 3, kHandHand, 1).size(), 6u);
    EXPECT_THROW(simulate_window(first, bank, 40, kHandHand, 1), CoverageError);
}

TEST(SimulateWindow, DeterministicPerSeed) {
    const auto cell = two_strata();
    const auto m = all_chirps(6, 4);
    EXPECT_EQ(simulate_window(m, cell, 42), simulate_window(m, cell, 42));
    EXPECT_NE(simulate_window(m, cell, 42), simulate_window(m, cell, 43));
}

TEST(SimulateWindow, MinAttenuationIsMaxOfTheScanAndDominates) {
    const auto cell = two_strata();
    LookModel first, all, minatt;
    all.sampling.policy = RecordingPolicy::AllChirps;
    all.sampling.samples_per_scan = 16;
    minatt.sampling.policy = RecordingPolicy::MinAttenuation;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const auto f = simulate_window(first, cell, seed);
        const auto a = simulate_window(all, cell, seed);
        const auto x = simulate_window(minatt, cell, seed);
        for (std::size_t k = 0; k < 6; ++k) {
            EXPECT_EQ(f[k], a[16 * k]);
            EXPECT_EQ(x[k], *std::max_element(a.begin() + 16 * k, a.begin() + 16 * (k + 1)));
            EXPECT_GE(x[k], f[k]);
        }
    }
}

TEST(SimulateWindow, CensoringAfterReduction) {
    const auto cell = StratifiedPdf::single(EmpiricalPdf(-103, {1, 0, 0, 0, 0, 1}));
    LookModel m;
    m.sampling.policy = RecordingPolicy::MinAttenuation;
    // The max over 16 chirps is almost surely -98, so nothing is censored.
    std::size_t kept = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) kept += simulate_window(m, cell, seed).size();
    EXPECT_EQ(kept, 300u);
    LookModel f;
    std::size_t kept_first = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed)
        for (int v : simulate_window(f, cell, seed)) {
            EXPECT_GE(v, kSensitivityFloorDbm);
            ++kept_first;
        }
    EXPECT_LT(kept_first, 300u);
}

TEST(Censor, Examples) {
    EXPECT_EQ(censor_sensitivity({-95, -99, -100}), (std::vector<int>{-95, -99, -100}));
    EXPECT_TRUE(censor_sensitivity({-101, -120}).empty());
    EXPECT_EQ(censor_sensitivity({-95, -105}), (std::vector<int>{-95}));
}

TEST(Rng, UniformRangeAndSeedMixing) {
    Rng r(1);
    for (int i = 0; i < 10000; ++i) {
        const double u = r.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
    }
    EXPECT_NE(mix_seed(1, 0), mix_seed(1, 1));
    EXPECT_NE(mix_seed(1, 0), mix_seed(2, 0));
    EXPECT_EQ(mix_seed(9, 9), mix_seed(9, 9));
}

// Within-scan correlation: two values from the same scan share a stratum, so
// their correlation exceeds that of values from different scans.
TEST(SimulateWindow, WithinScanCorrelationExceedsCrossScan) {
    const auto cell = two_strata();
    const auto m = all_chirps(6, 4);
    const CellSampler sampler(cell);
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0, cx = 0, cy = 0, cxx = 0, cyy = 0, cxy = 0;
    const int trials = 100000;
    for (int t = 0; t < trials; ++t) {
        const auto v = simulate_window(m, sampler, mix_seed(5, t));
        const double a = v[0], b = v[1], c = v[4];
        sx += a, sy += b, sxx += a * a, syy += b * b, sxy += a * b;
        cx += a, cy += c, cxx += a * a, cyy += c * c, cxy += a * c;
    }
    auto corr = [&](double x, double y, double xx, double yy, double xy) {
        const double n = trials;
        const double cov = xy / n - (x / n) * (y / n);
        return cov / std::sqrt((xx / n - (x / n) * (x / n)) * (yy / n - (y / n) * (y / n)));
    };
    const double within = corr(sx, sy, sxx, syy, sxy);
    const double across = corr(cx, cy, cxx, cyy, cxy);
    EXPECT_GT(within, 0.8);
    EXPECT_LT(std::abs(across), 0.02);
}

TEST(Exceedance, ExactIndependentMatchesBinomial) {
    const auto cell = StratifiedPdf::single(gaussian_pdf(-60, 5));
    const auto t = exceedance_exact(cell, LookModel::independent(6));
    EXPECT_FALSE(t.monte_carlo());
    for (int tau = -75; tau <= -45; tau += 5)
        for (int m = 1; m <= 6; ++m)
            EXPECT_NEAR(t.pd(tau, m), binomial_tail(cell.pooled().tail(tau), m, 6), 1e-12);
    EXPECT_NEAR(t.pd(t.tau_lo() - 5, 6), 1.0, 1e-12);
    EXPECT_DOUBLE_EQ(t.pd(t.tau_hi() + 1, 1), 0.0);
    EXPECT_DOUBLE_EQ(t.pd(-60, 7), 0.0);
}

TEST(Exceedance, MonotoneInTauAndM) {
    const auto t = exceedance_exact(two_strata(), all_chirps(6, 4));
    for (int tau = t.tau_lo(); tau <= t.tau_hi(); ++tau)
        for (int m = 1; m <= t.looks(); ++m) {
            if (m > 1) EXPECT_LE(t.pd(tau, m), t.pd(tau, m - 1) + 1e-12);
            if (tau > t.tau_lo()) EXPECT_LE(t.pd(tau, m), t.pd(tau - 1, m) + 1e-12);
        }
}

// Dual route: stratum convolution against simulation, within 3 sigma plus a
// small allowance for the 24 x 112 simultaneous comparisons.
TEST(Exceedance, MonteCarloAgreesWithExact) {
    const auto cell = two_strata();
    for (const auto& model : {LookModel::independent(6), all_chirps(6, 4)}) {
        const auto exact = exceedance_exact(cell, model);
        MonteCarloOptions mc;
        mc.trials = 100000;
        const auto sim = exceedance_monte_carlo(cell, model, mc);
        ASSERT_TRUE(sim.monte_carlo());
        int outside = 0, total = 0;
        for (int tau = -65; tau <= -50; ++tau)
            for (int m = 1; m <= model.looks(); ++m) {
                const double p = exact.pd(tau, m);
                const double sigma = std::sqrt(p * (1 - p) / 1e5);
                ++total;
                if (std::abs(sim.pd(tau, m) - p) > 3 * sigma + 1e-12) ++outside;
                EXPECT_LT(std::abs(sim.pd(tau, m) - p), 5 * sigma + 1e-9) << tau << " " << m;
            }
        EXPECT_LE(outside, total / 50 + 1);
    }
}

TEST(Exceedance, MinAttenuationExactAndSimulated) {
    const auto cell = two_strata();
    LookModel m;
    m.sampling.policy = RecordingPolicy::MinAttenuation;
    const auto exact = exceedance_exact(cell, m);
    MonteCarloOptions mc;
    mc.trials = 50000;
    const auto sim = exceedance_monte_carlo(cell, m, mc);
    for (int tau = -60; tau <= -50; ++tau)
        for (int k = 1; k <= 6; ++k) {
            const double p = exact.pd(tau, k);
            EXPECT_NEAR(sim.pd(tau, k), p, 5 * std::sqrt(p * (1 - p) / 5e4) + 1e-9);
        }
    const auto first = exceedance_exact(cell, LookModel{});
    for (int tau = -80; tau <= -45; ++tau) EXPECT_GE(exact.pd(tau, 1), first.pd(tau, 1) - 1e-12);
}

TEST(Exceedance, MonteCarloThreadCountInvariant) {
    const auto cell = two_strata();
    MonteCarloOptions one, eight;
    one.trials = eight.trials = 20000;
    eight.threads = 8;
    const auto a = exceedance_monte_carlo(cell, all_chirps(6, 4), one);
    const auto b = exceedance_monte_carlo(cell, all_chirps(6, 4), eight);
    for (int tau = a.tau_lo(); tau <= a.tau_hi(); ++tau)
        for (int m = 1; m <= 24; ++m) ASSERT_EQ(a.pd(tau, m), b.pd(tau, m));
}

TEST(Exceedance, AutoPicksRouteByCorrelation) {
    const auto cell = two_strata();
    MonteCarloOptions mc;
    mc.trials = 1000;
    EXPECT_FALSE(exceedance(cell, LookModel::independent(6), PdMethod::Auto, mc).monte_carlo());
    EXPECT_TRUE(exceedance(cell, all_chirps(6, 4), PdMethod::Auto, mc).monte_carlo());
    EXPECT_FALSE(exceedance(cell, all_chirps(6, 4), PdMethod::Exact, mc).monte_carlo());
}

TEST(LookModel, JsonRoundTrip) {
    const auto m = all_chirps(10, 2);
    const auto back = LookModel::from_json(m.to_json());
    EXPECT_EQ(back.looks(), 20);
    EXPECT_EQ(back.sampling.correlation, Correlation::WithinScanCorrelated);
}
