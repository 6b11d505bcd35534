#include "tcftl/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>
#include <tuple>

#include "tcftl/errors.hpp"
#include "tcftl/parallel.hpp"

namespace tcftl {

double DetCurve::pd_at(double p_fa) const {
    if (points.empty()) return 0.0;
    if (p_fa <= points.front().p_fa) return points.front().p_d;
    for (std::size_t i = 1; i < points.size(); ++i) {
        const auto& a = points[i - 1];
        const auto& b = points[i];
        if (p_fa <= b.p_fa) {
            if (b.p_fa == a.p_fa) return std::max(a.p_d, b.p_d);
            const double t = (p_fa - a.p_fa) / (b.p_fa - a.p_fa);
            return a.p_d + t * (b.p_d - a.p_d);
        }
    }
    return points.back().p_d;
}

std::string to_string(DetMode m) {
    switch (m) {
        case DetMode::MofN: return "m-of-n";
        case DetMode::OneOfN: return "one-of-n";
        case DetMode::Agnostic: return "agnostic";
        case DetMode::Cognitive: return "cognitive";
    }
    return "m-of-n";
}

DetMode parse_det_mode(const std::string& text) {
    if (text == "m-of-n" || text == "mofn") return DetMode::MofN;
    if (text == "one-of-n" || text == "1-of-n" || text == "max") return DetMode::OneOfN;
    if (text == "agnostic") return DetMode::Agnostic;
    if (text == "cognitive") return DetMode::Cognitive;
    throw ConfigError("unknown detector mode '" + text + "'");
}

CarriagePrior::CarriagePrior(std::map<CarriagePair, double> weights) : weights_(std::move(weights)) {
    if (weights_.empty()) throw ConfigError("carriage prior is empty");
    double sum = 0.0;
    for (const auto& [c, w] : weights_) {
        if (!(w >= 0.0)) throw ConfigError("carriage prior weights must be >= 0");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("carriage prior weights must sum to 1");
}

CarriagePrior CarriagePrior::uniform(std::span<const CarriagePair> pairs) {
    std::map<CarriagePair, double> w;
    for (const auto& c : pairs) w[c] = 1.0;
    for (auto& [c, v] : w) v = 1.0 / static_cast<double>(w.size());
    return CarriagePrior(std::move(w));
}

CarriagePrior CarriagePrior::factored(std::span<const CarriagePair> pairs, double p_hand, double p_standing) {
    if (!(p_hand >= 0.0 && p_hand <= 1.0 && p_standing >= 0.0 && p_standing <= 1.0))
        throw ConfigError("factored prior probabilities must lie in [0, 1]");
    auto user = [&](const CarriageState& s) {
        return (s.holding == Holding::Hand ? p_hand : 1.0 - p_hand) *
               (s.posture == Posture::Standing ? p_standing : 1.0 - p_standing);
    };
    std::map<CarriagePair, double> w;
    double sum = 0.0;
    for (const auto& c : pairs) {
        w[c] = user(c.user1) * user(c.user2);
        sum += w[c];
    }
    if (!(sum > 0.0)) throw ConfigError("factored prior gives every pair zero weight");
    for (auto& [c, v] : w) v /= sum;
    return CarriagePrior(std::move(w));
}

double CarriagePrior::weight(const CarriagePair& c) const {
    auto it = weights_.find(c);
    return it == weights_.end() ? 0.0 : it->second;
}

std::vector<CarriagePair> CarriagePrior::pairs() const {
    std::vector<CarriagePair> out;
    for (const auto& [c, w] : weights_) out.push_back(c);
    return out;
}

nlohmann::json CarriagePrior::to_json() const {
    nlohmann::json w = nlohmann::json::object();
    for (const auto& [c, v] : weights_) w[to_string(c)] = v;
    return {{"weights", std::move(w)}};
}

CarriagePrior CarriagePrior::from_json(const nlohmann::json& j) {
    const nlohmann::json& w = j.contains("weights") ? j.at("weights") : j;
    std::map<CarriagePair, double> out;
    try {
        for (const auto& [k, v] : w.items()) out[parse_carriage_pair(k)] = v.get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed carriage prior: ") + e.what());
    } catch (const InputError& e) {
        throw ConfigError(std::string("malformed carriage prior: ") + e.what());
    }
    return CarriagePrior(std::move(out));
}

std::vector<DetPoint> pareto_envelope(std::vector<DetPoint> candidates) {
    std::sort(candidates.begin(), candidates.end(), [](const DetPoint& a, const DetPoint& b) {
        if (a.p_fa != b.p_fa) return a.p_fa < b.p_fa;
        if (a.p_d != b.p_d) return a.p_d > b.p_d;
        if (a.detector.m != b.detector.m) return a.detector.m < b.detector.m;
        return a.detector.tau > b.detector.tau;
    });
    std::vector<DetPoint> out;
    for (auto& p : candidates) {
        if (!out.empty() && p.p_d <= out.back().p_d) continue;
        out.push_back(std::move(p));
    }
    return out;
}

std::vector<MofNDetector> sweep_detectors(std::span<const StateTables> states, DetMode mode, double cognitive_step) {
    if (states.empty()) throw ParameterError("detector sweep needs at least one carriage state");
    const int n = states.front().looks();
    if (n < 1) throw ParameterError("detector sweep needs n >= 1");
    const auto [lo, hi] = threshold_range(states);
    std::vector<MofNDetector> out;

    if (mode != DetMode::Cognitive) {
        const int m_max = mode == DetMode::OneOfN ? 1 : n;
        for (int tau = lo; tau <= hi; ++tau)
            for (int m = 1; m <= m_max; ++m) out.push_back({tau, m, n, std::nullopt, std::nullopt});
        return out;
    }

    if (!(cognitive_step > 0.0 && cognitive_step < 1.0)) throw ParameterError("cognitive step must lie in (0, 1)");
    std::set<std::tuple<int, int, std::vector<int>>> seen;
    auto add = [&](MofNDetector d) {
        std::vector<int> key;
        for (const auto& [c, v] : *d.offsets) key.push_back(v);
        if (seen.insert({d.tau, d.m, key}).second) out.push_back(std::move(d));
    };
    std::map<CarriagePair, int> zero;
    for (const auto& s : states) zero[s.carriage] = 0;
    add({hi, 1, n, zero, states.front().carriage});
    add({lo, 1, n, zero, states.front().carriage});
    const int steps = static_cast<int>(std::floor(1.0 / cognitive_step + 1e-9));
    for (int k = 1; k < steps; ++k) {
        const double target = k * cognitive_step;
        for (int m = 1; m <= n; ++m)
            if (auto r = align_thresholds(states, m, target)) add(std::move(r->detector));
    }
    return out;
}

DetPoint operating_point(const MofNDetector& det, std::span<const StateTables> states, const CarriagePrior& prior) {
    DetPoint p{0.0, 0.0, det};
    for (const auto& [c, w] : prior.weights()) {
        if (w == 0.0) continue;
        auto it = std::find_if(states.begin(), states.end(), [&](const StateTables& s) { return s.carriage == c; });
        if (it == states.end()) throw CoverageError("no hypothesis tables for prior state " + to_string(c));
        const int tau = det.tau - det.offset_for(c);
        p.p_d += w * it->h1.pd(tau, det.m);
        p.p_fa += w * it->h0.pd(tau, det.m);
    }
    p.p_d = std::min(p.p_d, 1.0);
    p.p_fa = std::min(p.p_fa, 1.0);
    return p;
}

DetCurve det_curve(std::span<const StateTables> states, const CarriagePrior& prior, DetMode mode,
                   double cognitive_step) {
    if ((mode == DetMode::MofN || mode == DetMode::OneOfN) && prior.weights().size() != 1)
        throw ParameterError(to_string(mode) + " curves are per carriage state; use agnostic or cognitive for a prior");
    std::vector<DetPoint> points;
    for (const auto& d : sweep_detectors(states, mode, cognitive_step))
        points.push_back(operating_point(d, states, prior));
    return DetCurve{pareto_envelope(std::move(points))};
}

DetCurve det_curve(const HypothesisPdfs& h, const LookModel& looks, DetMode mode, const TabulateOptions& options) {
    if (looks.looks() < 1) throw ParameterError("n must be >= 1");
    const CarriagePair c{};
    const StateModel state{c, h};
    const auto tables = tabulate_states(std::span<const StateModel>(&state, 1), looks, options);
    return det_curve(tables, CarriagePrior::single(c), mode);
}

PdEstimate pd_at_range(const MofNDetector& det, const ConditionalPdfBank& bank, double distance_ft,
                       const CarriagePair& c, const LookModel& looks, const TabulateOptions& options) {
    det.validate();
    if (det.n != looks.looks())
        throw ParameterError("detector n (" + std::to_string(det.n) + ") differs from the look model's " +
                             std::to_string(looks.looks()) + " looks");
    const auto table = exceedance(bank.at(c, distance_ft), looks, options.method, options.mc);
    const int tau = det.tau - det.offset_for(c);
    return {table.pd(tau, det.m), table.std_error(tau, det.m)};
}

double integrate_contacts(const std::vector<double>& grid, const ContactDensity& density, const Interval& interval,
                          const std::function<double(double)>& pd_at_grid, double max_gap_ft) {
    double sum = 0.0;
    for (const auto& node : quadrature_nodes(grid, density, interval, max_gap_ft))
        sum += node.weight * pd_at_grid(node.grid_ft);
    return sum;
}

double expected_contacts(const MofNDetector& det, const ConditionalPdfBank& bank, const ContactDensity& density,
                         const CarriagePair& c, const Interval& interval, const LookModel& looks,
                         const TabulateOptions& options, double max_gap_ft) {
    return integrate_contacts(
        bank.grid(c), density, interval,
        [&](double s) { return pd_at_range(det, bank, s, c, looks, options).value; }, max_gap_ft);
}

double fdr(double tc, double fc) {
    if (tc < 0.0 || fc < 0.0) throw ParameterError("contact counts must be >= 0");
    if (!(tc + fc > 0.0)) throw ParameterError("FDR is undefined without any declarations");
    return fc / (tc + fc);
}

std::optional<double> FdrCurve::pd_at_fdr(double target) const {
    std::optional<std::size_t> last;
    for (std::size_t i = 0; i < points.size(); ++i)
        if (points[i].fdr <= target) last = i;
    if (!last) return std::nullopt;
    const std::size_t i = *last;
    if (i + 1 == points.size()) return points[i].p_d;
    const auto& a = points[i];
    const auto& b = points[i + 1];
    if (b.fdr == a.fdr) return a.p_d;
    const double t = (target - a.fdr) / (b.fdr - a.fdr);
    return a.p_d + t * (b.p_d - a.p_d);
}

nlohmann::json EvaluationSettings::to_json() const {
    return {{"looks", looks.to_json()},
            {"pd_method", to_string(tabulate.method)},
            {"mc_trials", tabulate.mc.trials},
            {"seed", tabulate.mc.seed},
            {"boundary_ft", hypotheses.boundary_ft},
            {"max_range_ft", hypotheses.max_range_ft},
            {"max_gap_ft", hypotheses.max_gap_ft},
            {"density", density.to_json()},
            {"cognitive_step", cognitive_step}};
}

ContactModel::ContactModel(const ConditionalPdfBank& bank, const CarriagePrior& prior,
                           const EvaluationSettings& settings)
    : prior_(prior) {
    settings.looks.validate();
    const auto& ho = settings.hypotheses;
    const Interval near{0.0, ho.boundary_ft, true};
    const Interval far{ho.boundary_ft, ho.max_range_ft, false};

    std::vector<StateModel> models;
    std::vector<std::vector<QuadratureNode>> near_nodes, far_nodes;
    for (const auto& c : prior.pairs()) {
        models.push_back({c, build_hypotheses(bank, settings.density, c, ho)});
        near_nodes.push_back(quadrature_nodes(bank.grid(c), settings.density, near, ho.max_gap_ft));
        far_nodes.push_back(quadrature_nodes(bank.grid(c), settings.density, far, ho.max_gap_ft));
    }

    // Jobs: one hypothesis pair per state, then one table per used grid cell.
    struct Job {
        std::size_t state;
        double grid_ft;
        std::size_t slot;
    };
    std::vector<Job> jobs;
    cell_tables_.resize(models.size());
    for (std::size_t i = 0; i < models.size(); ++i) {
        std::vector<double> used;
        for (const auto* nodes : {&near_nodes[i], &far_nodes[i]})
            for (const auto& n : *nodes)
                if (std::none_of(used.begin(), used.end(), [&](double g) { return same_distance(g, n.grid_ft); }))
                    used.push_back(n.grid_ft);
        std::sort(used.begin(), used.end());
        for (double g : used) {
            jobs.push_back({i, g, cell_tables_[i].size()});
            cell_tables_[i].emplace_back(g, ExceedanceTable{});
        }
    }

    hyp_tables_.resize(models.size());
    const std::size_t total = models.size() + jobs.size();
    parallel_for(total, settings.threads, [&](std::size_t k) {
        TabulateOptions opt = settings.tabulate;
        opt.mc.threads = 1;
        opt.mc.seed = mix_seed(settings.tabulate.mc.seed, 1000003ull * (k + 1));
        if (k < models.size()) {
            hyp_tables_[k] = tabulate_states(std::span<const StateModel>(&models[k], 1), settings.looks, opt).front();
            return;
        }
        const Job& job = jobs[k - models.size()];
        cell_tables_[job.state][job.slot].second =
            exceedance(bank.at(models[job.state].carriage, job.grid_ft), settings.looks, opt.method, opt.mc);
    });

    auto lookup = [&](std::size_t i, double g) {
        for (const auto& [s, t] : cell_tables_[i])
            if (same_distance(s, g)) return &t;
        throw CoverageError("missing cell table");
    };
    for (std::size_t i = 0; i < models.size(); ++i) {
        StateNodes sn{models[i].carriage, prior.weight(models[i].carriage), {}, {}};
        for (const auto& n : near_nodes[i]) {
            sn.near.push_back({n.weight, lookup(i, n.grid_ft)});
            tc_all_ += sn.prior * n.weight;
        }
        for (const auto& n : far_nodes[i]) sn.far.push_back({n.weight, lookup(i, n.grid_ft)});
        states_.push_back(std::move(sn));
    }
}

FdrPoint ContactModel::evaluate(const MofNDetector& det) const {
    FdrPoint p;
    p.detector = det;
    for (const auto& s : states_) {
        if (s.prior == 0.0) continue;
        const int tau = det.tau - det.offset_for(s.carriage);
        double tc = 0.0;
        double fc = 0.0;
        for (const auto& n : s.near) tc += n.weight * n.table->pd(tau, det.m);
        for (const auto& n : s.far) fc += n.weight * n.table->pd(tau, det.m);
        p.tc += s.prior * tc;
        p.fc += s.prior * fc;
    }
    p.p_d = tc_all_ > 0.0 ? std::min(p.tc / tc_all_, 1.0) : 0.0;
    p.fdr = p.tc + p.fc > 0.0 ? fdr(p.tc, p.fc) : 0.0;
    return p;
}

FdrCurve fdr_curve(DetMode mode, const ContactModel& model, double cognitive_step) {
    std::vector<FdrPoint> points;
    for (const auto& d : sweep_detectors(model.hypothesis_tables(), mode, cognitive_step)) {
        FdrPoint p = model.evaluate(d);
        if (p.tc + p.fc > 0.0) points.push_back(std::move(p));
    }
    std::sort(points.begin(), points.end(), [](const FdrPoint& a, const FdrPoint& b) {
        if (a.p_d != b.p_d) return a.p_d > b.p_d;
        if (a.fdr != b.fdr) return a.fdr < b.fdr;
        if (a.detector.m != b.detector.m) return a.detector.m < b.detector.m;
        return a.detector.tau > b.detector.tau;
    });
    FdrCurve curve;
    for (auto& p : points) {
        if (!curve.points.empty() && p.fdr >= curve.points.back().fdr) continue;
        curve.points.push_back(std::move(p));
    }
    std::reverse(curve.points.begin(), curve.points.end());
    return curve;
}

FdrCurve fdr_curve(DetMode mode, const ConditionalPdfBank& bank, const CarriagePrior& prior,
                   const EvaluationSettings& settings) {
    return fdr_curve(mode, ContactModel(bank, prior, settings), settings.cognitive_step);
}

std::vector<LookSweepRow> look_sweep(DetMode mode, std::span<const LookConfig> configs, const ConditionalPdfBank& bank,
                                     const CarriagePrior& prior, const EvaluationSettings& settings,
                                     double fdr_target) {
    if (!(fdr_target > 0.0 && fdr_target < 1.0)) throw ParameterError("FDR target must lie in (0, 1)");
    std::vector<LookSweepRow> rows;
    for (const auto& cfg : configs) {
        EvaluationSettings s = settings;
        s.looks.scan.scans_per_window = cfg.scans;
        s.looks.sampling.samples_per_scan = cfg.samples_per_scan;
        if (cfg.samples_per_scan > 1)
            s.looks.sampling.policy = RecordingPolicy::AllChirps;
        else if (s.looks.sampling.policy == RecordingPolicy::AllChirps)
            s.looks.sampling.policy = RecordingPolicy::FirstChirp;
        s.looks.validate();
        const auto curve = fdr_curve(mode, bank, prior, s);
        rows.push_back({cfg, s.looks.looks(), curve.pd_at_fdr(fdr_target)});
    }
    return rows;
}

namespace {

std::string offsets_field(const MofNDetector& d) {
    if (!d.offsets) return {};
    std::string out;
    for (const auto& [c, v] : *d.offsets) {
        if (!out.empty()) out += ';';
        out += to_string(c) + "=" + std::to_string(v);
    }
    return out;
}

}  // namespace

void write_det_csv(std::ostream& os, const DetCurve& curve) {
    std::ostringstream buf;
    buf << std::setprecision(12);
    buf << "p_fa,p_d,tau,m,n,offsets\n";
    for (const auto& p : curve.points)
        buf << p.p_fa << ',' << p.p_d << ',' << p.detector.tau << ',' << p.detector.m << ',' << p.detector.n << ','
            << offsets_field(p.detector) << '\n';
    os << buf.str();
}

void write_fdr_csv(std::ostream& os, const FdrCurve& curve) {
    std::ostringstream buf;
    buf << std::setprecision(12);
    buf << "p_d,fdr,tc,fc,tau,m,n,offsets\n";
    for (const auto& p : curve.points)
        buf << p.p_d << ',' << p.fdr << ',' << p.tc << ',' << p.fc << ',' << p.detector.tau << ',' << p.detector.m
            << ',' << p.detector.n << ',' << offsets_field(p.detector) << '\n';
    os << buf.str();
}

void write_sweep_csv(std::ostream& os, std::span<const LookSweepRow> rows, double fdr_target) {
    std::ostringstream buf;
    buf << std::setprecision(12);
    buf << "scans,samples_per_scan,looks,fdr_target,p_d,status\n";
    for (const auto& r : rows) {
        buf << r.config.scans << ',' << r.config.samples_per_scan << ',' << r.looks << ',' << fdr_target << ',';
        if (r.p_d)
            buf << *r.p_d << ",ok\n";
        else
            buf << ",infeasible\n";
    }
    os << buf.str();
}

nlohmann::json to_json(const DetCurve& curve) {
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : curve.points) pts.push_back({{"p_fa", p.p_fa}, {"p_d", p.p_d}, {"detector", p.detector.to_json()}});
    return {{"points", std::move(pts)}};
}

nlohmann::json to_json(const FdrCurve& curve) {
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : curve.points)
        pts.push_back({{"p_d", p.p_d}, {"fdr", p.fdr}, {"tc", p.tc}, {"fc", p.fc}, {"detector", p.detector.to_json()}});
    return {{"points", std::move(pts)}};
}

}  // namespace tcftl
