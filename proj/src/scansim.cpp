#include "tcftl/scansim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tcftl/binomial.hpp"
#include "tcftl/errors.hpp"
#include "tcftl/parallel.hpp"

namespace tcftl {

int ScanModel::chirps_per_scan() const {
    return static_cast<int>(std::floor(chirp_rate_hz * scan_duration_s + 1e-9));
}

void ScanModel::validate() const {
    if (!(chirp_rate_hz > 0.0)) throw ParameterError("chirp rate must be positive");
    if (!(scan_duration_s > 0.0)) throw ParameterError("scan duration must be positive");
    if (!(scan_duration_s < scan_interval_s)) throw ParameterError("scan duration must be shorter than the scan interval");
    if (scans_per_window < 1) throw ParameterError("scans per window must be >= 1");
    if (!(window_s > 0.0)) throw ParameterError("window must be positive");
    if (chirps_per_scan() < 1) throw ParameterError("chirp rate x scan duration must allow at least one chirp");
}

nlohmann::json ScanModel::to_json() const {
    return {{"chirp_rate_hz", chirp_rate_hz},
            {"scan_interval_s", scan_interval_s},
            {"scan_duration_s", scan_duration_s},
            {"scans_per_window", scans_per_window},
            {"window_s", window_s}};
}

ScanModel ScanModel::from_json(const nlohmann::json& j) {
    ScanModel m;
    try {
        m.chirp_rate_hz = j.value("chirp_rate_hz", m.chirp_rate_hz);
        m.scan_interval_s = j.value("scan_interval_s", m.scan_interval_s);
        m.scan_duration_s = j.value("scan_duration_s", m.scan_duration_s);
        m.scans_per_window = j.value("scans_per_window", m.scans_per_window);
        m.window_s = j.value("window_s", m.window_s);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed scan model: ") + e.what());
    }
    m.validate();
    return m;
}

std::string to_string(RecordingPolicy p) {
    switch (p) {
        case RecordingPolicy::FirstChirp: return "first-chirp";
        case RecordingPolicy::AllChirps: return "all-chirps";
        case RecordingPolicy::MinAttenuation: return "min-attenuation";
    }
    return "first-chirp";
}

std::string to_string(Correlation c) {
    return c == Correlation::Independent ? "independent" : "within-scan";
}

RecordingPolicy parse_recording_policy(const std::string& text) {
    if (text == "first-chirp" || text == "first") return RecordingPolicy::FirstChirp;
    if (text == "all-chirps" || text == "all") return RecordingPolicy::AllChirps;
    if (text == "min-attenuation" || text == "max-rssi" || text == "min") return RecordingPolicy::MinAttenuation;
    throw ConfigError("unknown recording policy '" + text + "'");
}

Correlation parse_correlation(const std::string& text) {
    if (text == "independent") return Correlation::Independent;
    if (text == "within-scan" || text == "correlated") return Correlation::WithinScanCorrelated;
    throw ConfigError("unknown correlation model '" + text + "'");
}

int SamplingModel::recorded_per_scan() const noexcept {
    return policy == RecordingPolicy::AllChirps ? samples_per_scan : 1;
}

void SamplingModel::validate(const ScanModel& scan) const {
    if (samples_per_scan < 1) throw ParameterError("samples per scan must be >= 1");
    if (policy == RecordingPolicy::AllChirps && samples_per_scan > scan.chirps_per_scan())
        throw ParameterError("samples per scan exceeds the chirps available in one scan (" +
                             std::to_string(scan.chirps_per_scan()) + ")");
}

nlohmann::json SamplingModel::to_json() const {
    return {{"policy", to_string(policy)},
            {"samples_per_scan", samples_per_scan},
            {"correlation", to_string(correlation)}};
}

SamplingModel SamplingModel::from_json(const nlohmann::json& j) {
    SamplingModel m;
    try {
        if (j.contains("policy")) m.policy = parse_recording_policy(j.at("policy").get<std::string>());
        m.samples_per_scan = j.value("samples_per_scan", m.samples_per_scan);
        if (j.contains("correlation")) m.correlation = parse_correlation(j.at("correlation").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed sampling model: ") + e.what());
    }
    return m;
}

void LookModel::validate() const {
    scan.validate();
    sampling.validate(scan);
}

LookModel LookModel::independent(int n) {
    LookModel m;
    m.scan.scans_per_window = n;
    m.sampling.policy = RecordingPolicy::FirstChirp;
    m.sampling.samples_per_scan = 1;
    m.sampling.correlation = Correlation::Independent;
    m.validate();
    return m;
}

LookModel LookModel::correlated(int scans, int per_scan) {
    LookModel m;
    m.scan.scans_per_window = scans;
    m.sampling.policy = per_scan == 1 ? RecordingPolicy::FirstChirp : RecordingPolicy::AllChirps;
    m.sampling.samples_per_scan = per_scan;
    m.sampling.correlation = Correlation::WithinScanCorrelated;
    m.validate();
    return m;
}

nlohmann::json LookModel::to_json() const {
    return {{"scan", scan.to_json()},
            {"sampling", sampling.to_json()},
            {"censor", censor},
            {"sensitivity_floor", sensitivity_floor}};
}

LookModel LookModel::from_json(const nlohmann::json& j) {
    LookModel m;
    if (j.contains("scan")) m.scan = ScanModel::from_json(j.at("scan"));
    if (j.contains("sampling")) m.sampling = SamplingModel::from_json(j.at("sampling"));
    m.censor = j.value("censor", m.censor);
    m.sensitivity_floor = j.value("sensitivity_floor", m.sensitivity_floor);
    m.validate();
    return m;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

std::uint64_t Rng::next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

double Rng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

namespace {

std::vector<double> cumulative(const std::vector<double>& p) {
    std::vector<double> c(p.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        acc += p[i];
        c[i] = acc;
    }
    if (!c.empty()) c.back() = 1.0;
    return c;
}

std::size_t invert(const std::vector<double>& cdf, double u) {
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    if (it == cdf.end()) --it;
    return static_cast<std::size_t>(it - cdf.begin());
}

}  // namespace

CellSampler::CellSampler(const StratifiedPdf& cell) {
    if (cell.empty()) throw CoverageError("cannot sample an empty cell");
    std::vector<double> weights;
    for (const auto& s : cell.strata()) {
        weights.push_back(s.weight);
        support_min_.push_back(s.pdf.support_min());
        cdfs_.push_back(cumulative(s.pdf.probabilities()));
    }
    stratum_cdf_ = cumulative(weights);
    pooled_min_ = cell.pooled().support_min();
    pooled_cdf_ = cumulative(cell.pooled().probabilities());
}

std::size_t CellSampler::draw_stratum(Rng& rng) const { return invert(stratum_cdf_, rng.uniform()); }

int CellSampler::draw(std::size_t stratum, Rng& rng) const {
    return support_min_[stratum] + static_cast<int>(invert(cdfs_[stratum], rng.uniform()));
}

int CellSampler::draw_pooled(Rng& rng) const {
    return pooled_min_ + static_cast<int>(invert(pooled_cdf_, rng.uniform()));
}

std::vector<int> simulate_window(const LookModel& model, const CellSampler& sampler, std::uint64_t seed) {
    Rng rng(seed);
    const int chirps = model.scan.chirps_per_scan();
    const bool correlated = model.sampling.correlation == Correlation::WithinScanCorrelated;
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(model.looks()));
    std::vector<int> scan(static_cast<std::size_t>(chirps));
    for (int k = 0; k < model.scan.scans_per_window; ++k) {
        // Every chirp of the scan is drawn regardless of policy, so the
        // policies see identical chirp sequences for a given seed.
        if (correlated) {
            const std::size_t stratum = sampler.draw_stratum(rng);
            for (auto& v : scan) v = sampler.draw(stratum, rng);
        } else {
            for (auto& v : scan) v = sampler.draw_pooled(rng);
        }
        switch (model.sampling.policy) {
            case RecordingPolicy::FirstChirp: out.push_back(scan.front()); break;
            case RecordingPolicy::AllChirps:
                out.insert(out.end(), scan.begin(), scan.begin() + model.sampling.samples_per_scan);
                break;
            case RecordingPolicy::MinAttenuation:
                out.push_back(*std::max_element(scan.begin(), scan.end()));
                break;
        }
    }
    if (model.censor) return censor_sensitivity(out, model.sensitivity_floor);
    return out;
}

std::vector<int> simulate_window(const LookModel& model, const StratifiedPdf& cell, std::uint64_t seed) {
    model.validate();
    return simulate_window(model, CellSampler(cell), seed);
}

std::vector<int> simulate_window(const LookModel& model, const ConditionalPdfBank& bank, double distance_ft,
                                 const CarriagePair& c, std::uint64_t seed) {
    return simulate_window(model, bank.at(c, distance_ft), seed);
}

std::vector<int> censor_sensitivity(const std::vector<int>& values, int floor) {
    std::vector<int> out;
    out.reserve(values.size());
    std::copy_if(values.begin(), values.end(), std::back_inserter(out), [floor](int v) { return v >= floor; });
    return out;
}

ExceedanceTable::ExceedanceTable(int tau_lo, int tau_hi, int looks, std::vector<double> pd,
                                 std::vector<double> std_error)
    : tau_lo_(tau_lo), tau_hi_(tau_hi), looks_(looks), pd_(std::move(pd)), std_error_(std::move(std_error)) {
    const auto expected = static_cast<std::size_t>(tau_hi - tau_lo + 1) * static_cast<std::size_t>(looks);
    if (tau_hi < tau_lo || looks < 1 || pd_.size() != expected ||
        (!std_error_.empty() && std_error_.size() != expected))
        throw ParameterError("inconsistent exceedance table dimensions");
}

std::size_t ExceedanceTable::index(int tau, int m) const noexcept {
    return static_cast<std::size_t>(tau - tau_lo_) * static_cast<std::size_t>(looks_) +
           static_cast<std::size_t>(m - 1);
}

double ExceedanceTable::pd(int tau, int m) const noexcept {
    if (m <= 0) return 1.0;
    if (m > looks_ || tau > tau_hi_ || pd_.empty()) return 0.0;
    return pd_[index(std::max(tau, tau_lo_), m)];
}

double ExceedanceTable::std_error(int tau, int m) const noexcept {
    if (std_error_.empty() || m <= 0 || m > looks_ || tau > tau_hi_) return 0.0;
    return std_error_[index(std::max(tau, tau_lo_), m)];
}

std::string to_string(PdMethod m) {
    switch (m) {
        case PdMethod::Auto: return "auto";
        case PdMethod::Exact: return "exact";
        case PdMethod::MonteCarlo: return "monte-carlo";
    }
    return "auto";
}

PdMethod parse_pd_method(const std::string& text) {
    if (text == "auto") return PdMethod::Auto;
    if (text == "exact") return PdMethod::Exact;
    if (text == "monte-carlo" || text == "mc") return PdMethod::MonteCarlo;
    throw ConfigError("unknown pd method '" + text + "'");
}

namespace {

// Per-value exceedance probability after the policy reduction, given the
// probability q that one chirp is >= the effective threshold.
double reduced_exceedance(double q, const LookModel& model) {
    if (model.sampling.policy == RecordingPolicy::MinAttenuation)
        return 1.0 - std::pow(1.0 - q, model.scan.chirps_per_scan());
    return q;
}

std::vector<double> convolve(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> out(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
    return out;
}

}  // namespace

ExceedanceTable exceedance_exact(const StratifiedPdf& cell, const LookModel& model) {
    model.validate();
    const EmpiricalPdf& pooled = cell.pooled();
    const int lo = pooled.support_min();
    const int hi = pooled.support_max();
    const int looks = model.looks();
    const int scans = model.scan.scans_per_window;
    const int per_scan = model.sampling.recorded_per_scan();
    const bool correlated = model.sampling.correlation == Correlation::WithinScanCorrelated;
    const int floor = model.censor ? model.sensitivity_floor : std::numeric_limits<int>::min();

    std::vector<double> pd(static_cast<std::size_t>(hi - lo + 1) * static_cast<std::size_t>(looks), 0.0);
    for (int tau = lo; tau <= hi; ++tau) {
        const int effective = std::max(tau, floor);
        std::vector<double> total;
        if (!correlated) {
            total = binomial_pmf(looks, reduced_exceedance(pooled.tail(effective), model));
        } else {
            std::vector<double> per_scan_pmf(static_cast<std::size_t>(per_scan) + 1, 0.0);
            for (const auto& s : cell.strata()) {
                const auto pmf = binomial_pmf(per_scan, reduced_exceedance(s.pdf.tail(effective), model));
                for (std::size_t j = 0; j < pmf.size(); ++j) per_scan_pmf[j] += s.weight * pmf[j];
            }
            total = {1.0};
            for (int k = 0; k < scans; ++k) total = convolve(total, per_scan_pmf);
        }
        const auto tail = suffix_sums(total);
        for (int m = 1; m <= looks; ++m)
            pd[static_cast<std::size_t>(tau - lo) * looks + (m - 1)] = tail[static_cast<std::size_t>(m)];
    }
    return ExceedanceTable(lo, hi, looks, std::move(pd));
}

ExceedanceTable exceedance_monte_carlo(const StratifiedPdf& cell, const LookModel& model,
                                       const MonteCarloOptions& mc) {
    model.validate();
    if (mc.trials == 0) throw ParameterError("Monte Carlo needs at least one trial");
    const CellSampler sampler(cell);
    const int lo = cell.pooled().support_min();
    const int hi = cell.pooled().support_max();
    const int looks = model.looks();
    const std::size_t bins = static_cast<std::size_t>(hi - lo + 1);

    // hist[m-1][v-lo] = windows whose m-th largest recorded value is v.
    // Fixed-size chunks keep the integer totals independent of thread count.
    constexpr std::size_t kChunk = 4096;
    const std::size_t chunks = (mc.trials + kChunk - 1) / kChunk;
    std::vector<std::vector<std::uint64_t>> partial(chunks);
    parallel_for(chunks, mc.threads, [&](std::size_t chunk) {
        std::vector<std::uint64_t> hist(static_cast<std::size_t>(looks) * bins, 0);
        const std::size_t begin = chunk * kChunk;
        const std::size_t end = std::min(mc.trials, begin + kChunk);
        for (std::size_t t = begin; t < end; ++t) {
            auto values = simulate_window(model, sampler, mix_seed(mc.seed, t));
            std::sort(values.begin(), values.end(), std::greater<>());
            for (std::size_t m = 0; m < values.size(); ++m)
                ++hist[m * bins + static_cast<std::size_t>(values[m] - lo)];
        }
        partial[chunk] = std::move(hist);
    });
    std::vector<std::uint64_t> hist(static_cast<std::size_t>(looks) * bins, 0);
    for (const auto& p : partial)
        for (std::size_t i = 0; i < hist.size(); ++i) hist[i] += p[i];

    const double trials = static_cast<double>(mc.trials);
    std::vector<double> pd(bins * static_cast<std::size_t>(looks), 0.0);
    std::vector<double> se(pd.size(), 0.0);
    for (int m = 1; m <= looks; ++m) {
        std::uint64_t above = 0;
        for (int tau = hi; tau >= lo; --tau) {
            above += hist[static_cast<std::size_t>(m - 1) * bins + static_cast<std::size_t>(tau - lo)];
            const double p = static_cast<double>(above) / trials;
            const std::size_t i = static_cast<std::size_t>(tau - lo) * looks + (m - 1);
            pd[i] = p;
            se[i] = std::sqrt(p * (1.0 - p) / trials);
        }
    }
    return ExceedanceTable(lo, hi, looks, std::move(pd), std::move(se));
}

ExceedanceTable exceedance(const StratifiedPdf& cell, const LookModel& model, PdMethod method,
                           const MonteCarloOptions& mc) {
    if (method == PdMethod::Auto)
        method = model.sampling.correlation == Correlation::Independent ? PdMethod::Exact : PdMethod::MonteCarlo;
    return method == PdMethod::Exact ? exceedance_exact(cell, model) : exceedance_monte_carlo(cell, model, mc);
}

}  // namespace tcftl
