// Acceptance checks: one PASS / FAIL / SKIP line per criterion. Exits non-zero
// only if some criterion fails. argv[1] is the tcftl executable.
#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include "support/synthetic.hpp"
#include "tcftl/binomial.hpp"
#include "tcftl/config.hpp"
#include "tcftl/detectors.hpp"
#include "tcftl/evaluation.hpp"

namespace fs = std::filesystem;
using namespace tcftl;
using tcftl::testing::gaussian_pdf;
using tcftl::testing::pair_of;

namespace {

struct Outcome {
    enum Kind { Pass, Fail, Skip } kind;
    std::string detail;
};

Outcome check(bool ok, std::string detail) { return {ok ? Outcome::Pass : Outcome::Fail, std::move(detail)}; }

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

const CarriagePair kHandHand = pair_of("standing:hand/standing:hand");
const CarriagePair kPocket = pair_of("standing:back_pants_pocket/standing:hand");

std::string g_cli;

// Real measurement bank, when TCFTL_DATASET_CSV (and optionally
// TCFTL_DATASET_CONFIG, a run config JSON) point at the public dataset.
std::optional<ConditionalPdfBank> real_bank() {
    static std::optional<std::optional<ConditionalPdfBank>> cached;
    if (cached) return *cached;
    cached.emplace();
    const char* csv = std::getenv("TCFTL_DATASET_CSV");
    const char* config = std::getenv("TCFTL_DATASET_CONFIG");
    if (!csv && !config) return std::nullopt;
    RunConfig cfg = config ? RunConfig::load(config) : RunConfig{};
    if (csv) cfg.datasets = {csv};
    if (!config) {
        cfg.deltas = "estimate";
        cfg.extend_to = {20, 25, 30};
    }
    IngestReport report;
    cached->emplace(load_bank(cfg, report));
    return *cached;
}

std::vector<ConditionalPdfBank> synthetic_banks() {
    return {tcftl::testing::synthetic_bank(tcftl::testing::two_states(10)),
            tcftl::testing::synthetic_bank(tcftl::testing::two_states(6), 30, 5, 3),
            tcftl::testing::synthetic_bank(tcftl::testing::two_states(8), 30, 14, 8)};
}

HypothesisPdfs hypotheses_of(const ConditionalPdfBank& bank, const CarriagePair& c) {
    return build_hypotheses(bank, ContactDensity::uniform_area(), c);
}

Outcome binomial_oracle() {
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0;
    for (int n = 1; n <= 12; ++n)
        for (int m = 1; m <= n; ++m)
            for (int i = 0; i <= 10; ++i) {
                const double p = i / 10.0;
                double sum = 0;
                for (unsigned mask = 0; mask < (1u << n); ++mask) {
                    const int k = __builtin_popcount(mask);
                    if (k >= m) sum += std::pow(p, k) * std::pow(1 - p, n - k);
                }
                worst = std::max(worst, std::abs(sum - mofn_detection_prob(p, m, n)));
            }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return check(worst <= 1e-12 && secs < 5.0, fmt("max error %.2e, %.2f s", worst, secs));
}

Outcome llr_oracle() {
    std::mt19937_64 gen(2020);
    std::uniform_real_distribution<double> w(0.05, 1.0);
    std::uniform_int_distribution<int> lo(-100, -40), width(1, 40);
    double worst = 0;
    for (int t = 0; t < 1000; ++t) {
        const int a = lo(gen), n = width(gen);
        std::vector<double> p1(n), p0(n);
        for (auto& v : p1) v = w(gen);
        for (auto& v : p0) v = w(gen);
        const EmpiricalPdf h1(a, p1), h0(a, p0);
        const auto nl = build_nonlinearity(h1, h0);
        std::uniform_int_distribution<int> x(a, a + n - 1);
        std::vector<int> s(6);
        for (auto& v : s) v = x(gen);
        double l1 = 1, l0 = 1;
        for (int v : s) l1 *= h1(v), l0 *= h0(v);
        worst = std::max(worst, std::abs(llr_statistic(nl, s) - std::log(l1 / l0)));
    }
    return check(worst <= 1e-9, fmt("max |LLR - log product ratio| = %.2e over 1000 pairs", worst));
}

Outcome gaussian_reduction() {
    const double mu1 = -60, mu0 = -70, sigma = 5;
    const auto nl = build_nonlinearity(gaussian_pdf(mu1, sigma), gaussian_pdf(mu0, sigma));
    std::mt19937_64 gen(7);
    std::normal_distribution<double> noise(0, sigma);
    int agree = 0;
    const int draws = 10000;
    for (int t = 0; t < draws; ++t) {
        const double mu = t % 2 ? mu1 : mu0;
        std::vector<int> s(6);
        for (auto& v : s) v = static_cast<int>(std::lround(mu + noise(gen)));
        const bool llr = decide_llr(nl, s, 0.0).verdict == Verdict::TooCloseTooLong;
        double mean = 0;
        for (int v : s) mean += v / 6.0;
        agree += llr == (mean >= 0.5 * (mu1 + mu0));
    }
    return check(agree >= 0.99 * draws, fmt("agreement %.4f over 1e4 draws", agree / double(draws)));
}

Outcome det_dominance() {
    int violations = 0, compared = 0;
    auto compare = [&](const HypothesisPdfs& h) {
        for (int n : {6, 24}) {
            const auto mofn = det_curve(h, LookModel::independent(n), DetMode::MofN);
            const auto one = det_curve(h, LookModel::independent(n), DetMode::OneOfN);
            for (const auto& p : one.points) {
                ++compared;
                if (mofn.pd_at(p.p_fa) < p.p_d - 1e-12) ++violations;
            }
        }
    };
    for (const auto& bank : synthetic_banks())
        for (const auto& c : bank.carriage_pairs()) compare(hypotheses_of(bank, c));
    std::string where = "synthetic banks";
    if (const auto real = real_bank()) {
        for (const auto& c : real->carriage_pairs()) compare(hypotheses_of(*real, c));
        where += " and dataset";
    }
    return check(violations == 0 && compared > 0,
                 std::to_string(violations) + " violations at " + std::to_string(compared) + " swept P_FA (" + where + ")");
}

Outcome sample_count_monotone() {
    std::string detail;
    bool ok = true;
    for (const auto& bank : synthetic_banks())
        for (const auto& c : bank.carriage_pairs()) {
            const auto h = hypotheses_of(bank, c);
            double prev = -1;
            for (int n : {6, 12, 24, 48}) {
                const double pd = det_curve(h, LookModel::independent(n), DetMode::MofN).pd_at(0.1);
                ok = ok && pd >= prev - 1e-12;
                detail += fmt("%.3f ", pd);
                prev = pd;
            }
            detail += "| ";
        }
    return check(ok, "P_D at P_FA 0.1 for N = 6/12/24/48: " + detail);
}

Outcome coin_flip() {
    double worst = 0;
    int curves = 0;
    TabulateOptions exact{PdMethod::Exact, {}};
    const auto g = tcftl::testing::synthetic_bank({{kHandHand, 0}}, 30).at(kHandHand, 4);
    const HypothesisPdfs same{g, g};
    auto scan = [&](const DetCurve& curve) {
        ++curves;
        for (const auto& p : curve.points) worst = std::max(worst, std::abs(p.p_d - p.p_fa));
    };
    for (auto mode : {DetMode::MofN, DetMode::OneOfN}) {
        for (int n : {6, 12, 24}) scan(det_curve(same, LookModel::independent(n), mode, exact));
        scan(det_curve(same, LookModel::correlated(6, 4), mode, exact));
    }
    // Two carriage states, each with H1 = H0, under the prior-averaging modes.
    std::vector<StateModel> states{{kHandHand, same}, {kPocket, {g.shifted(-10), g.shifted(-10)}}};
    const auto tables = tabulate_states(states, LookModel::independent(6), exact);
    const auto prior = CarriagePrior::uniform(std::vector{kHandHand, kPocket});
    for (auto mode : {DetMode::Agnostic, DetMode::Cognitive}) scan(det_curve(tables, prior, mode));
    return check(worst <= 1e-3, fmt("max |P_D - P_FA| = %.2e", worst) + " over " + std::to_string(curves) + " curves");
}

Outcome fdr_identities() {
    bool ok = fdr(3.7, 0) == 0.0 && fdr(2.5, 2.5) == 0.5 && fdr(1e-3, 1e-3) == 0.5;
    for (double tc : {0.1, 1.0, 18.0}) {
        double prev = -1;
        for (double fc = 0; fc <= 500; fc += 0.25) {
            const double f = fdr(tc, fc);
            ok = ok && f > prev;
            prev = f;
        }
    }
    return check(ok, "fdr(tc,0)=0, fdr(t,t)=0.5, strictly increasing in fc");
}

Outcome integral_checks() {
    const auto bank = tcftl::testing::synthetic_bank(tcftl::testing::two_states());
    const MofNDetector always{-200, 1, 6, std::nullopt, std::nullopt};
    const auto d = ContactDensity::uniform_area();
    const auto looks = LookModel::independent(6);
    const double near = expected_contacts(always, bank, d, kHandHand, {0, 6, true}, looks);
    const double far = expected_contacts(always, bank, d, kHandHand, {6, 30, false}, looks);
    const bool ok = std::abs(near - 18) <= 0.005 * 18 && std::abs(far - 432) <= 0.005 * 432;
    return check(ok, fmt("near %.6f (18), far %.6f (432)", near, far));
}

Outcome minimax_recovery() {
    const auto bank = tcftl::testing::synthetic_bank(tcftl::testing::two_states(10));
    std::vector<StateModel> states;
    for (const auto& c : {kHandHand, kPocket}) states.push_back({c, hypotheses_of(bank, c)});
    const auto tables = tabulate_states(states, LookModel::independent(6));
    const auto r = minimax_select(tables, 0.6);
    const int offset = r.detector.offset_for(kPocket) - r.detector.offset_for(kHandHand);
    // With the offset applied, both states trace the same DET curve point by point.
    double worst = 0;
    const auto [lo, hi] = threshold_range(tables);
    for (int tau = lo; tau <= hi; ++tau)
        for (int m = 1; m <= 6; ++m) {
            const int t2 = tau - offset;
            worst = std::max({worst, std::abs(tables[0].h1.pd(tau, m) - tables[1].h1.pd(t2, m)),
                              std::abs(tables[0].h0.pd(tau, m) - tables[1].h0.pd(t2, m))});
        }
    const bool ok = std::abs(offset - 10) <= 1 && worst <= 1e-3;
    return check(ok, "offset " + std::to_string(offset) + " dB, " + fmt("max curve gap %.2e", worst));
}

Outcome scan_policies() {
    const auto bank = tcftl::testing::synthetic_bank(tcftl::testing::two_states());
    const auto& cell = bank.at(kHandHand, 3);
    LookModel first;
    first.sampling = {RecordingPolicy::FirstChirp, 1, Correlation::WithinScanCorrelated};
    LookModel all = first;
    all.sampling = {RecordingPolicy::AllChirps, 4, Correlation::WithinScanCorrelated};
    LookModel minatt = first;
    minatt.sampling.policy = RecordingPolicy::MinAttenuation;

    const CellSampler sampler(cell);
    bool sizes = true;
    std::size_t windows = 100000, pathwise = 0;
    std::map<int, std::size_t> hist_first, hist_min;
    for (std::size_t w = 0; w < windows; ++w) {
        const auto seed = mix_seed(42, w);
        const auto a = simulate_window(first, sampler, seed);
        const auto b = simulate_window(minatt, sampler, seed);
        if (w < 1000) sizes = sizes && a.size() == 6 && simulate_window(all, sampler, seed).size() == 24;
        bool dom = a.size() == b.size();
        for (std::size_t i = 0; dom && i < a.size(); ++i) dom = b[i] >= a[i];
        pathwise += dom;
        for (int v : a) ++hist_first[v];
        for (int v : b) ++hist_min[v];
    }
    // Empirical survival functions: min-attenuation is never below first-chirp.
    bool survival = true;
    std::size_t sf = 0, sm = 0;
    for (int x = 12; x >= -110; --x) {
        sf += hist_first[x];
        sm += hist_min[x];
        survival = survival && sm >= sf;
    }
    return check(sizes && survival && pathwise == windows,
                 std::string("sizes 6/24 ") + (sizes ? "ok" : "wrong") + ", survival dominance " +
                     (survival ? "ok" : "violated") + ", pathwise " + std::to_string(pathwise) + "/" +
                     std::to_string(windows));
}

Outcome dataset_checks() {
    const auto real = real_bank();
    if (!real) return {Outcome::Skip, "dataset absent; set TCFTL_DATASET_CSV (and optionally TCFTL_DATASET_CONFIG)"};
    const auto& bank = *real;
    std::string detail;
    bool ok = true;

    // (a) hand/hand versus a back-pants-pocket pair at matched ranges.
    std::optional<CarriagePair> pocket;
    for (const auto& c : bank.carriage_pairs())
        if (to_string(c).find("pants") != std::string::npos && c.user2 == kHandHand.user2) pocket = c;
    if (!pocket)
        for (const auto& c : bank.carriage_pairs())
            if (to_string(c).find("pants") != std::string::npos) pocket = c;
    const auto pairs = bank.carriage_pairs();
    if (!pocket || std::find(pairs.begin(), pairs.end(), kHandHand) == pairs.end()) return check(false, "dataset lacks hand/hand or pants-pocket pairs");
    double diff_sum = 0;
    int matched = 0;
    for (double s : bank.grid(kHandHand))
        if (bank.find(*pocket, s)) {
            diff_sum += bank.pdf(kHandHand, s).median() - bank.pdf(*pocket, s).median();
            ++matched;
        }
    const double diff = matched ? diff_sum / matched : 0.0;
    ok = ok && matched > 0 && diff > 10;
    detail += fmt("(a) mean median gap %.1f dB; ", diff);

    // (b) cognitive per-state thresholds at overall P_D 0.6.
    const auto prior = CarriagePrior::uniform(bank.carriage_pairs());
    std::vector<StateModel> states;
    for (const auto& c : prior.pairs()) states.push_back({c, hypotheses_of(bank, c)});
    const auto tables = tabulate_states(states, LookModel::independent(6));
    const auto r = minimax_select(tables, 0.6);
    int tmin = 1000, tmax = -1000;
    for (const auto& [c, op] : r.per_state) tmin = std::min(tmin, op.threshold), tmax = std::max(tmax, op.threshold);
    ok = ok && tmax - tmin >= 15;
    detail += "(b) threshold span " + std::to_string(tmax - tmin) + " dB; ";

    // (c) P_D at FDR 0.5 for 6 and 24 correlated looks.
    EvaluationSettings s;
    s.looks.sampling = {RecordingPolicy::FirstChirp, 1, Correlation::WithinScanCorrelated};
    const std::vector<LookConfig> configs{{6, 1}, {6, 4}};
    const auto agn = look_sweep(DetMode::Agnostic, configs, bank, prior, s, 0.5);
    const auto cog = look_sweep(DetMode::Cognitive, configs, bank, prior, s, 0.5);
    auto pd = [](const LookSweepRow& row) { return row.p_d.value_or(0.0); };
    ok = ok && pd(cog[0]) > pd(agn[0]) && pd(cog[1]) > pd(agn[1]) && pd(agn[0]) < 0.4 && pd(cog[1]) > 0.5;
    detail += fmt("(c) agnostic %.3f/%.3f, ", pd(agn[0]), pd(agn[1])) +
              fmt("cognitive %.3f/%.3f for 6/24 looks", pd(cog[0]), pd(cog[1]));
    return check(ok, detail);
}

int run_cli(const fs::path& dir, const std::string& args) {
    const std::string cmd = "cd '" + dir.string() + "' && '" + g_cli + "' " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::map<std::string, std::string> tree_contents(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file()) continue;
        std::ifstream in(e.path(), std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        out[fs::relative(e.path(), root).string()] = ss.str();
    }
    return out;
}

Outcome reproducibility() {
    if (g_cli.empty()) return check(false, "no CLI path given");
    const fs::path base = fs::temp_directory_path() / "tcftl_acceptance_repro";
    fs::remove_all(base);
    const auto csv = tcftl::testing::synthetic_csv(tcftl::testing::two_states(), {1, 2, 3, 4, 5, 6, 9, 12, 15, 20, 25, 30}, 4, 3);
    const std::vector<std::string> commands{
        "ingest --dataset data.csv --deltas estimate",
        "estimate --dataset data.csv --deltas estimate",
        "det --dataset data.csv --mode cognitive --correlation within-scan --trials 4000",
        "fdr --dataset data.csv --mode agnostic --policy all-chirps --samples-per-scan 4 --n 24 "
        "--correlation within-scan --trials 4000",
        "sweep --dataset data.csv --mode cognitive --correlation within-scan --trials 2000",
        "optimize --dataset data.csv --prior factored --correlation within-scan --trials 4000",
        "simulate --dataset data.csv --policy min-attenuation --windows 500",
    };
    std::vector<std::map<std::string, std::string>> trees;
    for (const auto& [run, threads] : std::vector<std::pair<int, int>>{{0, 1}, {1, 1}, {2, 8}, {3, 8}}) {
        const fs::path dir = base / ("run" + std::to_string(run));
        fs::create_directories(dir);
        std::ofstream(dir / "data.csv", std::ios::binary) << csv;
        for (const auto& c : commands)
            if (int code = run_cli(dir, c + " --seed 77 --out out --threads " + std::to_string(threads)); code != 0)
                return check(false, "'" + c + "' exited with " + std::to_string(code));
        trees.push_back(tree_contents(dir / "out"));
    }
    fs::remove_all(base);
    const bool ok = trees[0].size() > 10 && std::all_of(trees.begin(), trees.end(), [&](const auto& t) { return t == trees[0]; });
    return check(ok, std::to_string(trees[0].size()) + " output files compared across 2 runs at 1 thread and 2 at 8");
}

}  // namespace

int main(int argc, char** argv) {
    if (argc > 1) g_cli = fs::absolute(argv[1]).string();
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"binomial oracle", binomial_oracle},
        {"LLR oracle", llr_oracle},
        {"Gaussian reduction", gaussian_reduction},
        {"DET dominance", det_dominance},
        {"sample-count monotonicity", sample_count_monotone},
        {"coin-flip baseline", coin_flip},
        {"FDR identities", fdr_identities},
        {"integral checks", integral_checks},
        {"minimax offset recovery", minimax_recovery},
        {"scan-policy cardinality and dominance", scan_policies},
        {"dataset-conditional checks", dataset_checks},
        {"reproducibility", reproducibility},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {Outcome::Fail, std::string("exception: ") + e.what()};
        }
        const char* tag = o.kind == Outcome::Pass ? "PASS" : o.kind == Outcome::Fail ? "FAIL" : "SKIP";
        failures += o.kind == Outcome::Fail;
        std::cout << tag << ' ' << (i + 1) << ' ' << criteria[i].first << ": " << o.detail << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
