#include "tcftl/detectors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tcftl/binomial.hpp"
#include "tcftl/errors.hpp"

namespace tcftl {

Nonlinearity::Nonlinearity(int support_min, std::vector<double> weights, double h0_floor)
    : support_min_(support_min), weights_(std::move(weights)), h0_floor_(h0_floor) {
    if (weights_.empty()) throw ParameterError("nonlinearity needs at least one bin");
    for (double w : weights_)
        if (!std::isfinite(w)) throw ParameterError("nonlinearity weights must be finite");
}

double Nonlinearity::weight(int x) const noexcept {
    const int clamped = std::clamp(x, support_min_, support_max());
    return weights_[static_cast<std::size_t>(clamped - support_min_)];
}

nlohmann::json Nonlinearity::to_json() const {
    return {{"support_min", support_min_}, {"weights", weights_}, {"h0_floor", h0_floor_}};
}

Nonlinearity build_nonlinearity(const EmpiricalPdf& h1, const EmpiricalPdf& h0, double floor) {
    if (!(floor > 0.0)) throw ParameterError("h0 floor must be positive");
    const int lo = std::min(h1.support_min(), h0.support_min());
    const int hi = std::max(h1.support_max(), h0.support_max());
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(hi - lo + 1));
    for (int x = lo; x <= hi; ++x) w.push_back(std::log(std::max(h1(x), floor)) - std::log(std::max(h0(x), floor)));
    return Nonlinearity(lo, std::move(w), floor);
}

Nonlinearity build_nonlinearity(const HypothesisPdfs& h, double floor) {
    return build_nonlinearity(h.h1.pooled(), h.h0.pooled(), floor);
}

double llr_statistic(const Nonlinearity& nl, std::span<const int> samples) {
    if (samples.empty()) throw InputError("llr statistic of an empty sample set");
    double sum = 0.0;
    for (int x : samples) sum += nl.weight(x);
    return sum;
}

Decision decide_llr(const Nonlinearity& nl, std::span<const int> samples, double threshold) {
    const double stat = llr_statistic(nl, samples);
    return {stat >= threshold ? Verdict::TooCloseTooLong : Verdict::NotTooClose, stat};
}

void MofNDetector::validate() const {
    if (n < 1) throw ParameterError("detector needs n >= 1");
    if (m < 1 || m > n) throw ParameterError("detector needs 1 <= m <= n");
}

int MofNDetector::offset_for(const CarriagePair& c) const {
    if (!offsets) return 0;
    auto it = offsets->find(c);
    if (it == offsets->end()) throw ConfigError("detector has no offset for carriage " + to_string(c));
    return it->second;
}

nlohmann::json MofNDetector::to_json() const {
    nlohmann::json j = {{"tau", tau}, {"m", m}, {"n", n}};
    if (offsets) {
        nlohmann::json o = nlohmann::json::object();
        for (const auto& [c, v] : *offsets) o[to_string(c)] = v;
        j["offsets"] = std::move(o);
    }
    if (reference) j["reference"] = to_string(*reference);
    return j;
}

MofNDetector MofNDetector::from_json(const nlohmann::json& j) {
    MofNDetector d;
    try {
        d.tau = j.at("tau").get<int>();
        d.m = j.at("m").get<int>();
        d.n = j.at("n").get<int>();
        if (j.contains("offsets")) {
            std::map<CarriagePair, int> o;
            for (const auto& [k, v] : j.at("offsets").items()) o[parse_carriage_pair(k)] = v.get<int>();
            d.offsets = std::move(o);
        }
        if (j.contains("reference")) d.reference = parse_carriage_pair(j.at("reference").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed detector: ") + e.what());
    } catch (const InputError& e) {
        throw ConfigError(std::string("malformed detector: ") + e.what());
    }
    d.validate();
    return d;
}

Decision decide_mofn(const MofNDetector& det, std::span<const Look> samples) {
    det.validate();
    if (samples.empty()) throw InputError("M-of-N decision on an empty sample set");
    int count = 0;
    for (const auto& s : samples)
        if (s.rssi + det.offset_for(s.carriage) >= det.tau) ++count;
    return {count >= det.m ? Verdict::TooCloseTooLong : Verdict::NotTooClose, static_cast<double>(count)};
}

Decision decide_mofn(const MofNDetector& det, std::span<const int> samples) {
    if (det.offsets) throw ConfigError("detector with carriage offsets needs carriage-labelled samples");
    det.validate();
    if (samples.empty()) throw InputError("M-of-N decision on an empty sample set");
    const auto count = std::count_if(samples.begin(), samples.end(), [&](int x) { return x >= det.tau; });
    return {count >= det.m ? Verdict::TooCloseTooLong : Verdict::NotTooClose, static_cast<double>(count)};
}

double mofn_detection_prob(double p_exceed, int m, int n) {
    if (!(p_exceed >= 0.0 && p_exceed <= 1.0)) throw ParameterError("exceedance probability must lie in [0, 1]");
    if (n < 1 || m < 1 || m > n) throw ParameterError("need 1 <= m <= n");
    return binomial_tail(p_exceed, m, n);
}

std::vector<StateTables> tabulate_states(std::span<const StateModel> states, const LookModel& looks,
                                         const TabulateOptions& options) {
    std::vector<StateTables> out;
    out.reserve(states.size());
    std::uint64_t stream = 0;
    for (const auto& s : states) {
        MonteCarloOptions mc = options.mc;
        mc.seed = mix_seed(options.mc.seed, stream++);
        ExceedanceTable h1 = exceedance(s.hypotheses.h1, looks, options.method, mc);
        mc.seed = mix_seed(options.mc.seed, stream++);
        ExceedanceTable h0 = exceedance(s.hypotheses.h0, looks, options.method, mc);
        out.push_back({s.carriage, std::move(h1), std::move(h0)});
    }
    return out;
}

std::pair<int, int> threshold_range(std::span<const StateTables> states) {
    int lo = std::numeric_limits<int>::max();
    int hi = std::numeric_limits<int>::min();
    for (const auto& s : states) {
        lo = std::min({lo, s.h1.tau_lo(), s.h0.tau_lo()});
        hi = std::max({hi, s.h1.tau_hi(), s.h0.tau_hi()});
    }
    return {lo, hi + 1};
}

std::optional<MinimaxResult> align_thresholds(std::span<const StateTables> states, int m, double target_pd) {
    if (states.empty()) throw ParameterError("minimax needs at least one carriage state");
    MinimaxResult r;
    r.worst_pd = 1.0;
    r.worst_pfa = 0.0;
    for (const auto& s : states) {
        const int lo = std::min(s.h1.tau_lo(), s.h0.tau_lo());
        const int hi = std::max(s.h1.tau_hi(), s.h0.tau_hi()) + 1;
        std::optional<int> best;
        for (int tau = hi; tau >= lo; --tau) {
            if (s.h1.pd(tau, m) >= target_pd - 1e-12) {
                best = tau;
                break;
            }
        }
        if (!best) return std::nullopt;
        StateOperatingPoint op{*best, s.h1.pd(*best, m), s.h0.pd(*best, m)};
        r.worst_pd = std::min(r.worst_pd, op.p_d);
        r.worst_pfa = std::max(r.worst_pfa, op.p_fa);
        r.per_state[s.carriage] = op;
    }
    const int ref_tau = r.per_state.at(states.front().carriage).threshold;
    std::map<CarriagePair, int> offsets;
    for (const auto& s : states) offsets[s.carriage] = ref_tau - r.per_state.at(s.carriage).threshold;
    r.detector.tau = ref_tau;
    r.detector.m = m;
    r.detector.n = states.front().looks();
    r.detector.offsets = std::move(offsets);
    r.detector.reference = states.front().carriage;
    return r;
}

MinimaxResult minimax_select(std::span<const StateTables> states, double target_pd) {
    if (states.empty()) throw ParameterError("minimax needs at least one carriage state");
    if (!(target_pd > 0.0 && target_pd < 1.0)) throw ParameterError("target P_D must lie in (0, 1)");
    const int n = states.front().looks();
    for (const auto& s : states)
        if (s.looks() != n || s.h0.looks() != n) throw ParameterError("all states must share one look count");

    std::optional<MinimaxResult> best;
    for (int m = 1; m <= n; ++m) {
        auto r = align_thresholds(states, m, target_pd);
        if (!r) continue;
        if (!best || r->worst_pfa < best->worst_pfa - 1e-15) best = std::move(r);
    }
    if (best) return *best;

    double reachable = 0.0;
    for (int m = 1; m <= n; ++m) {
        double worst = 1.0;
        for (const auto& s : states) worst = std::min(worst, s.h1.pd(s.h1.tau_lo(), m));
        reachable = std::max(reachable, worst);
    }
    throw InfeasibleError("target P_D " + std::to_string(target_pd) +
                              " is unreachable; best worst-state P_D is " + std::to_string(reachable),
                          reachable);
}

MinimaxResult minimax_select(std::span<const StateModel> states, const LookModel& looks, double target_pd,
                             const TabulateOptions& options) {
    const auto tables = tabulate_states(states, looks, options);
    return minimax_select(tables, target_pd);
}

}  // namespace tcftl
