#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "support/synthetic.hpp"
#include "tcftl/binomial.hpp"
#include "tcftl/detectors.hpp"
#include "tcftl/errors.hpp"

using namespace tcftl;
using tcftl::testing::gaussian_pdf;
using tcftl::testing::pair_of;

namespace {

const CarriagePair kHandHand = pair_of("standing:hand/standing:hand");
const CarriagePair kPocket = pair_of("standing:back_pants_pocket/standing:hand");

std::vector<Look> looks_of(const std::vector<int>& values, const CarriagePair& c = kHandHand) {
    std::vector<Look> out;
    for (int v : values) out.push_back({v, c});
    return out;
}

// Probability that at least m of n Bernoulli(p) trials succeed, by listing
// all 2^n outcomes.
double enumerate_tail(double p, int m, int n) {
    double sum = 0.0;
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
        const int k = __builtin_popcount(mask);
        if (k >= m) sum += std::pow(p, k) * std::pow(1 - p, n - k);
    }
    return sum;
}

}  // namespace

TEST(Binomial, MatchesEnumeration) {
    for (int n = 1; n <= 10; ++n)
        for (int m = 1; m <= n; ++m)
            for (int i = 0; i <= 10; ++i) EXPECT_NEAR(mofn_detection_prob(i / 10.0, m, n), enumerate_tail(i / 10.0, m, n), 1e-12);
}

TEST(Binomial, Examples) {
    EXPECT_DOUBLE_EQ(mofn_detection_prob(0.37, 1, 1), 0.37);
    EXPECT_NEAR(mofn_detection_prob(0.5, 1, 4), 0.9375, 1e-15);
    EXPECT_NEAR(mofn_detection_prob(0.5, 2, 6), 0.890625, 1e-15);
    EXPECT_THROW(mofn_detection_prob(1.1, 1, 2), ParameterError);
    EXPECT_THROW(mofn_detection_prob(0.5, 3, 2), ParameterError);
    EXPECT_THROW(mofn_detection_prob(0.5, 0, 2), ParameterError);
    EXPECT_EQ(binomial_coefficient(24, 12), 2704156.0);
}

TEST(Binomial, MonotoneProperties) {
    for (int n = 1; n <= 12; ++n)
        for (int m = 1; m <= n; ++m)
            for (int i = 0; i < 20; ++i) {
                const double p = i / 20.0, q = (i + 1) / 20.0;
                EXPECT_LE(mofn_detection_prob(p, m, n), mofn_detection_prob(q, m, n) + 1e-15);
                if (m < n) EXPECT_GE(mofn_detection_prob(p, m, n), mofn_detection_prob(p, m + 1, n) - 1e-15);
                if (n < 12) EXPECT_LE(mofn_detection_prob(p, m, n), mofn_detection_prob(p, m, n + 1) + 1e-15);
            }
}

TEST(Binomial, AgreesWithBernoulliSimulation) {
    Rng rng(3);
    const int trials = 100000;
    for (auto [p, m, n] : {std::tuple{0.3, 2, 6}, std::tuple{0.1, 1, 6}, std::tuple{0.6, 5, 8}}) {
        int hits = 0;
        for (int t = 0; t < trials; ++t) {
            int k = 0;
            for (int i = 0; i < n; ++i) k += rng.uniform() < p;
            hits += k >= m;
        }
        const double exact = mofn_detection_prob(p, m, n);
        EXPECT_NEAR(hits / double(trials), exact, 4 * std::sqrt(exact * (1 - exact) / trials));
    }
}

TEST(Nonlinearity, IdenticalPdfsGiveZeroWeights) {
    const auto p = gaussian_pdf(-60, 4);
    const auto nl = build_nonlinearity(p, p);
    for (double w : nl.weights()) EXPECT_DOUBLE_EQ(w, 0.0);
}

TEST(Nonlinearity, DirectFormulaAndFloor) {
    const EmpiricalPdf h1(-61, {0.2, 0.8});
    const EmpiricalPdf h0(-61, {0.1, 0.0, 0.9});
    const auto nl = build_nonlinearity(h1, h0, 1e-4);
    EXPECT_NEAR(nl.weight(-61), std::log(2.0), 1e-12);
    EXPECT_NEAR(nl.weight(-60), std::log(0.8) - std::log(1e-4), 1e-12);
    EXPECT_NEAR(nl.weight(-59), std::log(1e-4) - std::log(0.9), 1e-12);
    EXPECT_DOUBLE_EQ(nl.weight(-200), nl.weight(-61));
    EXPECT_DOUBLE_EQ(nl.weight(50), nl.weight(-59));
    EXPECT_THROW(build_nonlinearity(h1, h0, 0.0), ParameterError);
}

TEST(Nonlinearity, EqualVarianceGaussiansAreAffine) {
    const double mu1 = -55, mu0 = -70, sigma = 5;
    const auto nl = build_nonlinearity(gaussian_pdf(mu1, sigma), gaussian_pdf(mu0, sigma), 1e-300);
    for (int x = -80; x <= -45; ++x) {
        const double closed = (mu1 - mu0) * (x - 0.5 * (mu1 + mu0)) / (sigma * sigma);
        EXPECT_NEAR(nl.weight(x), closed, 0.02 * std::abs(closed) + 0.02) << x;
    }
}

TEST(Llr, SumsWeights) {
    const Nonlinearity nl(-60, {1.5}, 1e-4);
    EXPECT_DOUBLE_EQ(llr_statistic(nl, std::vector<int>{-60, -60}), 3.0);
    const Nonlinearity zero(-70, std::vector<double>(20, 0.0), 1e-4);
    EXPECT_DOUBLE_EQ(llr_statistic(zero, std::vector<int>{-61, -65, -90}), 0.0);
    EXPECT_THROW(llr_statistic(nl, std::vector<int>{}), InputError);
}

TEST(Llr, EqualsProductLikelihoodRatio) {
    std::mt19937_64 gen(17);
    const auto h1 = gaussian_pdf(-60, 6, -100, 12).with_floor(1e-3);
    const auto h0 = gaussian_pdf(-72, 7, -100, 12).with_floor(1e-3);
    const auto nl = build_nonlinearity(h1, h0);
    std::uniform_int_distribution<int> x(-100, 12);
    for (int t = 0; t < 200; ++t) {
        std::vector<int> s(5);
        for (auto& v : s) v = x(gen);
        double l1 = 1, l0 = 1;
        for (int v : s) l1 *= h1(v), l0 *= h0(v);
        EXPECT_NEAR(llr_statistic(nl, s), std::log(l1 / l0), 1e-9);
    }
}

TEST(DecideLlr, ThresholdInclusive) {
    const Nonlinearity nl(-60, {1.0}, 1e-4);
    EXPECT_EQ(decide_llr(nl, std::vector<int>{-60}, 1.0).verdict, Verdict::TooCloseTooLong);
    EXPECT_EQ(decide_llr(nl, std::vector<int>{-60}, 1.5).verdict, Verdict::NotTooClose);
}

TEST(DecideMofN, Examples) {
    const MofNDetector one{-60, 1, 1, std::nullopt, std::nullopt};
    EXPECT_EQ(decide_mofn(one, std::vector<int>{-60}).verdict, Verdict::TooCloseTooLong);

    const MofNDetector three{-60, 3, 6, std::nullopt, std::nullopt};
    const auto d = decide_mofn(three, std::vector<int>{-50, -50, -90, -90, -90, -90});
    EXPECT_EQ(d.verdict, Verdict::NotTooClose);
    EXPECT_EQ(d.statistic, 2.0);

    MofNDetector corrected{-60, 1, 1, std::map<CarriagePair, int>{{kHandHand, -10}}, kHandHand};
    EXPECT_EQ(decide_mofn(corrected, looks_of({-55})).verdict, Verdict::NotTooClose);
    EXPECT_THROW(decide_mofn(corrected, looks_of({-55}, kPocket)), ConfigError);
    EXPECT_THROW(decide_mofn(corrected, std::vector<int>{-55}), ConfigError);
    EXPECT_THROW(decide_mofn(three, std::vector<int>{}), InputError);
    EXPECT_THROW((MofNDetector{-60, 7, 6, std::nullopt, std::nullopt}.validate()), ParameterError);
}

TEST(DecideMofN, Properties) {
    std::mt19937_64 gen(23);
    std::uniform_int_distribution<int> x(-90, -40), delta(-20, 20), mdist(1, 6);
    for (int t = 0; t < 2000; ++t) {
        std::vector<int> s(6);
        for (auto& v : s) v = x(gen);
        const int tau = x(gen), m = mdist(gen), dlt = delta(gen);
        const MofNDetector det{tau, m, 6, std::nullopt, std::nullopt};
        const auto base = decide_mofn(det, s).verdict;

        auto shifted = s;
        for (auto& v : shifted) v += dlt;
        EXPECT_EQ(decide_mofn({tau + dlt, m, 6, std::nullopt, std::nullopt}, shifted).verdict, base);

        if (base == Verdict::NotTooClose)
            EXPECT_EQ(decide_mofn({tau + 1, m, 6, std::nullopt, std::nullopt}, s).verdict, Verdict::NotTooClose);
        if (base == Verdict::TooCloseTooLong && m > 1)
            EXPECT_EQ(decide_mofn({tau, m - 1, 6, std::nullopt, std::nullopt}, s).verdict, Verdict::TooCloseTooLong);

        const bool max_rule = *std::max_element(s.begin(), s.end()) >= tau;
        EXPECT_EQ(decide_mofn({tau, 1, 6, std::nullopt, std::nullopt}, s).verdict == Verdict::TooCloseTooLong, max_rule);
    }
}

TEST(MofNDetector, JsonRoundTrip) {
    MofNDetector d{-62, 2, 6, std::map<CarriagePair, int>{{kHandHand, 0}, {kPocket, 10}}, kHandHand};
    const auto back = MofNDetector::from_json(d.to_json());
    EXPECT_EQ(back.tau, -62);
    EXPECT_EQ(back.offset_for(kPocket), 10);
    EXPECT_EQ(*back.reference, kHandHand);
    EXPECT_THROW(MofNDetector::from_json({{"tau", -60}, {"m", 3}, {"n", 2}}), ParameterError);
    EXPECT_THROW(MofNDetector::from_json({{"tau", "x"}}), ConfigError);
}

namespace {

std::vector<StateModel> shifted_states(double shift_db) {
    const auto bank = tcftl::testing::synthetic_bank(tcftl::testing::two_states(shift_db));
    std::vector<StateModel> out;
    for (const auto& c : {kHandHand, kPocket})
        out.push_back({c, build_hypotheses(bank, ContactDensity::uniform_area(), c)});
    return out;
}

}  // namespace

TEST(Minimax, SingleStateReducesToItsBestDetector) {
    const auto states = shifted_states(10);
    const auto tables = tabulate_states(std::span(states).first(1), LookModel::independent(6));
    const auto r = minimax_select(tables, 0.8);
    // Brute force: every (tau, m) reaching P_D 0.8, smallest P_FA, ties to small m.
    double best = 2;
    int best_m = 0;
    for (int m = 1; m <= 6; ++m) {
        for (int tau = tables[0].h1.tau_hi() + 1; tau >= tables[0].h1.tau_lo(); --tau)
            if (tables[0].h1.pd(tau, m) >= 0.8 - 1e-12) {
                if (tables[0].h0.pd(tau, m) < best - 1e-15) best = tables[0].h0.pd(tau, m), best_m = m;
                break;
            }
    }
    EXPECT_DOUBLE_EQ(r.worst_pfa, best);
    EXPECT_EQ(r.detector.m, best_m);
    EXPECT_GE(r.worst_pd, 0.8);
}

TEST(Minimax, RecoversKnownShift) {
    const auto states = shifted_states(10);
    const auto r = minimax_select(states, LookModel::independent(6), 0.6);
    EXPECT_EQ(r.detector.offset_for(kHandHand), 0);
    EXPECT_NEAR(r.detector.offset_for(kPocket), 10, 1);
    EXPECT_EQ(*r.detector.reference, kHandHand);
    for (const auto& [c, op] : r.per_state) EXPECT_GE(op.p_d, 0.6 - 1e-12);
}

TEST(Minimax, UnreachableTargetReportsBest) {
    // Every window is fully censored, so no threshold can ever fire.
    ConditionalPdfBank bank;
    for (double s = 1; s <= 30; s += 1)
        bank.insert(kHandHand, s, StratifiedPdf::single(EmpiricalPdf::point_mass(-110)));
    const std::vector<StateModel> states{{kHandHand, build_hypotheses(bank, ContactDensity::uniform_area(), kHandHand)}};
    try {
        minimax_select(states, LookModel::independent(6), 0.5);
        FAIL();
    } catch (const InfeasibleError& e) {
        EXPECT_EQ(e.best_achievable(), 0.0);
    }
    EXPECT_THROW(minimax_select(states, LookModel::independent(6), 1.0), ParameterError);
}
