#include "tcftl/densities.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "tcftl/errors.hpp"

namespace tcftl {

EmpiricalPdf::EmpiricalPdf(int support_min, std::vector<double> weights, std::size_t sample_count)
    : support_min_(support_min), probs_(std::move(weights)), sample_count_(sample_count) {
    if (probs_.empty()) throw EstimationError("empty probability vector");
    double sum = 0.0;
    for (double w : probs_) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw EstimationError("probability weights must be finite and >= 0");
        sum += w;
    }
    if (!(sum > 0.0)) throw EstimationError("probability weights sum to zero");
    for (double& w : probs_) w /= sum;
}

EmpiricalPdf EmpiricalPdf::point_mass(int x, std::size_t sample_count) { return EmpiricalPdf(x, {1.0}, sample_count); }

double EmpiricalPdf::operator()(int x) const noexcept {
    if (x < support_min_ || x > support_max()) return 0.0;
    return probs_[static_cast<std::size_t>(x - support_min_)];
}

double EmpiricalPdf::tail(int tau) const noexcept {
    if (probs_.empty() || tau > support_max()) return 0.0;
    if (tau <= support_min_) return 1.0;
    double sum = 0.0;
    for (std::size_t i = static_cast<std::size_t>(tau - support_min_); i < probs_.size(); ++i) sum += probs_[i];
    return std::min(sum, 1.0);
}

double EmpiricalPdf::mean() const noexcept {
    double m = 0.0;
    for (std::size_t i = 0; i < probs_.size(); ++i) m += probs_[i] * (support_min_ + static_cast<int>(i));
    return m;
}

int EmpiricalPdf::median() const noexcept {
    double cdf = 0.0;
    for (std::size_t i = 0; i < probs_.size(); ++i) {
        cdf += probs_[i];
        if (cdf >= 0.5 - 1e-12) return support_min_ + static_cast<int>(i);
    }
    return support_max();
}

double EmpiricalPdf::total() const noexcept { return std::accumulate(probs_.begin(), probs_.end(), 0.0); }

EmpiricalPdf EmpiricalPdf::shifted(int delta_db) const {
    EmpiricalPdf out = *this;
    out.support_min_ += delta_db;
    return out;
}

EmpiricalPdf EmpiricalPdf::widened(int lo, int hi) const {
    const int new_lo = std::min(lo, support_min_);
    const int new_hi = std::max(hi, support_max());
    if (new_lo == support_min_ && new_hi == support_max()) return *this;
    EmpiricalPdf out;
    out.support_min_ = new_lo;
    out.sample_count_ = sample_count_;
    out.probs_.assign(static_cast<std::size_t>(new_hi - new_lo + 1), 0.0);
    std::copy(probs_.begin(), probs_.end(), out.probs_.begin() + (support_min_ - new_lo));
    return out;
}

EmpiricalPdf EmpiricalPdf::with_floor(double epsilon) const {
    if (epsilon < 0.0) throw ParameterError("epsilon floor must be >= 0");
    std::vector<double> w = probs_;
    for (double& x : w) x += epsilon;
    return EmpiricalPdf(support_min_, std::move(w), sample_count_);
}

nlohmann::json EmpiricalPdf::to_json() const {
    return {{"support_min", support_min_}, {"probabilities", probs_}, {"sample_count", sample_count_}};
}

EmpiricalPdf EmpiricalPdf::from_json(const nlohmann::json& j) {
    try {
        return EmpiricalPdf(j.at("support_min").get<int>(), j.at("probabilities").get<std::vector<double>>(),
                            j.value("sample_count", std::size_t{0}));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed pdf: ") + e.what());
    }
}

EmpiricalPdf weighted_sum(const std::vector<std::pair<double, const EmpiricalPdf*>>& terms) {
    if (terms.empty()) throw EstimationError("weighted sum of no distributions");
    int lo = terms.front().second->support_min();
    int hi = terms.front().second->support_max();
    for (const auto& [w, p] : terms) {
        lo = std::min(lo, p->support_min());
        hi = std::max(hi, p->support_max());
    }
    std::vector<double> acc(static_cast<std::size_t>(hi - lo + 1), 0.0);
    std::size_t count = 0;
    for (const auto& [w, p] : terms) {
        if (w < 0.0) throw EstimationError("negative mixture weight");
        const auto& probs = p->probabilities();
        const std::size_t off = static_cast<std::size_t>(p->support_min() - lo);
        for (std::size_t i = 0; i < probs.size(); ++i) acc[off + i] += w * probs[i];
        count += p->sample_count();
    }
    return EmpiricalPdf(lo, std::move(acc), count);
}

StratifiedPdf::StratifiedPdf(std::vector<Stratum> strata) : strata_(std::move(strata)) {
    if (strata_.empty()) throw EstimationError("stratified pdf needs at least one stratum");
    double total = 0.0;
    for (const auto& s : strata_) {
        if (!(s.weight >= 0.0)) throw EstimationError("negative stratum weight");
        total += s.weight;
    }
    if (!(total > 0.0)) throw EstimationError("stratum weights sum to zero");
    std::vector<std::pair<double, const EmpiricalPdf*>> terms;
    for (auto& s : strata_) {
        s.weight /= total;
        terms.emplace_back(s.weight, &s.pdf);
    }
    pooled_ = weighted_sum(terms);
}

StratifiedPdf StratifiedPdf::single(EmpiricalPdf pdf, std::string label) {
    return StratifiedPdf({Stratum{std::move(label), 1.0, std::move(pdf)}});
}

StratifiedPdf StratifiedPdf::shifted(int delta_db) const {
    std::vector<Stratum> s = strata_;
    for (auto& x : s) x.pdf = x.pdf.shifted(delta_db);
    return StratifiedPdf(std::move(s));
}

nlohmann::json StratifiedPdf::to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& s : strata_) {
        nlohmann::json j = s.pdf.to_json();
        j["label"] = s.label;
        j["weight"] = s.weight;
        arr.push_back(std::move(j));
    }
    return {{"pooled", pooled_.to_json()}, {"strata", std::move(arr)}};
}

StratifiedPdf StratifiedPdf::from_json(const nlohmann::json& j) {
    std::vector<Stratum> strata;
    try {
        for (const auto& s : j.at("strata"))
            strata.push_back({s.value("label", std::string{}), s.at("weight").get<double>(), EmpiricalPdf::from_json(s)});
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed stratified pdf: ") + e.what());
    }
    return StratifiedPdf(std::move(strata));
}

namespace {

std::vector<const RssiSample*> select_cell(const Dataset& d, double distance_ft, const CarriagePair& c,
                                           const PdfOptions& options) {
    std::vector<const RssiSample*> out;
    for (const auto& s : d.samples()) {
        if (s.carriage != c || !same_distance(s.distance_ft, distance_ft)) continue;
        if (s.synthetic && !options.include_synthetic) continue;
        out.push_back(&s);
    }
    if (out.empty())
        throw EstimationError("no samples for cell (" + std::to_string(distance_ft) + " ft, " + to_string(c) + ")");
    return out;
}

EmpiricalPdf histogram(const std::vector<const RssiSample*>& samples, int lo, int hi, double epsilon) {
    std::vector<double> counts(static_cast<std::size_t>(hi - lo + 1), 0.0);
    for (const RssiSample* s : samples) counts[static_cast<std::size_t>(s->rssi - lo)] += 1.0;
    EmpiricalPdf pdf(lo, std::move(counts), samples.size());
    return epsilon > 0.0 ? pdf.with_floor(epsilon) : pdf;
}

std::pair<int, int> support_for(const std::vector<const RssiSample*>& samples, const PdfOptions& options) {
    int lo = options.support_lo;
    int hi = options.support_hi;
    for (const RssiSample* s : samples) {
        lo = std::min(lo, s->rssi);
        hi = std::max(hi, s->rssi);
    }
    return {lo, hi};
}

}  // namespace

EmpiricalPdf estimate_pdf(const Dataset& d, double distance_ft, const CarriagePair& c, const PdfOptions& options) {
    const auto samples = select_cell(d, distance_ft, c, options);
    const auto [lo, hi] = support_for(samples, options);
    return histogram(samples, lo, hi, options.epsilon);
}

StratifiedPdf estimate_stratified_pdf(const Dataset& d, double distance_ft, const CarriagePair& c,
                                      const PdfOptions& options) {
    const auto samples = select_cell(d, distance_ft, c, options);
    const auto [lo, hi] = support_for(samples, options);
    std::map<std::pair<int, int>, std::vector<const RssiSample*>> groups;
    for (const RssiSample* s : samples) groups[{s->pose_user1, s->pose_user2}].push_back(s);
    std::vector<Stratum> strata;
    for (const auto& [pose, members] : groups) {
        strata.push_back({std::to_string(pose.first) + "/" + std::to_string(pose.second),
                          static_cast<double>(members.size()), histogram(members, lo, hi, options.epsilon)});
    }
    return StratifiedPdf(std::move(strata));
}

void ConditionalPdfBank::insert(const CarriagePair& c, double distance_ft, StratifiedPdf cell) {
    if (!(distance_ft >= 0.0)) throw ParameterError("bank distance must be >= 0");
    auto& row = cells_[c];
    auto it = std::find_if(row.begin(), row.end(), [&](const auto& e) { return same_distance(e.first, distance_ft); });
    if (it != row.end()) {
        it->second = std::move(cell);
        return;
    }
    row.emplace_back(distance_ft, std::move(cell));
    std::sort(row.begin(), row.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
}

const StratifiedPdf* ConditionalPdfBank::find(const CarriagePair& c, double distance_ft) const {
    auto row = cells_.find(c);
    if (row == cells_.end()) return nullptr;
    for (const auto& [s, cell] : row->second)
        if (same_distance(s, distance_ft)) return &cell;
    return nullptr;
}

const StratifiedPdf& ConditionalPdfBank::at(const CarriagePair& c, double distance_ft) const {
    if (const StratifiedPdf* p = find(c, distance_ft)) return *p;
    throw CoverageError("pdf bank has no cell (" + std::to_string(distance_ft) + " ft, " + to_string(c) + ")");
}

std::vector<double> ConditionalPdfBank::grid(const CarriagePair& c) const {
    std::vector<double> out;
    if (auto row = cells_.find(c); row != cells_.end())
        for (const auto& e : row->second) out.push_back(e.first);
    return out;
}

std::vector<CarriagePair> ConditionalPdfBank::carriage_pairs() const {
    std::vector<CarriagePair> out;
    for (const auto& [c, row] : cells_) out.push_back(c);
    return out;
}

std::size_t ConditionalPdfBank::size() const noexcept {
    std::size_t n = 0;
    for (const auto& [c, row] : cells_) n += row.size();
    return n;
}

nlohmann::json ConditionalPdfBank::to_json() const {
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& [c, row] : cells_) {
        for (const auto& [s, cell] : row) {
            nlohmann::json j = cell.to_json();
            j["carriage"] = to_string(c);
            j["distance_ft"] = s;
            cells.push_back(std::move(j));
        }
    }
    return {{"format", "tcftl-pdf-bank"}, {"version", 1}, {"cells", std::move(cells)}};
}

ConditionalPdfBank ConditionalPdfBank::from_json(const nlohmann::json& j) {
    if (j.value("format", std::string{}) != "tcftl-pdf-bank") throw ConfigError("not a tcftl pdf bank");
    ConditionalPdfBank bank;
    try {
        for (const auto& cell : j.at("cells"))
            bank.insert(parse_carriage_pair(cell.at("carriage").get<std::string>()),
                        cell.at("distance_ft").get<double>(), StratifiedPdf::from_json(cell));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed pdf bank: ") + e.what());
    } catch (const InputError& e) {
        throw ConfigError(std::string("malformed pdf bank: ") + e.what());
    }
    return bank;
}

ConditionalPdfBank estimate_bank(const Dataset& d, const PdfOptions& options) {
    if (d.empty()) throw EstimationError("cannot estimate a pdf bank from an empty dataset");
    ConditionalPdfBank bank;
    for (const auto& c : d.carriage_pairs())
        for (double s : d.distances(c)) {
            try {
                bank.insert(c, s, estimate_stratified_pdf(d, s, c, options));
            } catch (const EstimationError&) {
                // every sample of the cell was synthetic and excluded
            }
        }
    return bank;
}

double uniform_area_density(double s_ft) {
    if (s_ft < 0.0) throw ParameterError("separation must be >= 0");
    return s_ft;
}

ContactDensity ContactDensity::custom(std::vector<std::pair<double, double>> table) {
    if (table.size() < 2) throw ConfigError("custom contact density needs at least two (s, D) points");
    std::sort(table.begin(), table.end());
    for (std::size_t i = 0; i < table.size(); ++i) {
        if (table[i].second < 0.0) throw ConfigError("contact density must be >= 0");
        if (i > 0 && table[i].first == table[i - 1].first) throw ConfigError("duplicate distance in density table");
    }
    ContactDensity d;
    d.kind_ = Kind::Custom;
    d.table_ = std::move(table);
    return d;
}

double ContactDensity::operator()(double s_ft) const {
    if (kind_ == Kind::UniformArea) return uniform_area_density(s_ft);
    if (s_ft < table_.front().first || s_ft > table_.back().first) return 0.0;
    auto hi = std::lower_bound(table_.begin(), table_.end(), s_ft,
                               [](const auto& e, double s) { return e.first < s; });
    if (hi->first == s_ft) return hi->second;
    auto lo = std::prev(hi);
    const double t = (s_ft - lo->first) / (hi->first - lo->first);
    return lo->second + t * (hi->second - lo->second);
}

nlohmann::json ContactDensity::to_json() const {
    if (kind_ == Kind::UniformArea) return {{"kind", "uniform_area"}};
    nlohmann::json t = nlohmann::json::array();
    for (const auto& [s, v] : table_) t.push_back({s, v});
    return {{"kind", "custom"}, {"table", std::move(t)}};
}

ContactDensity ContactDensity::from_json(const nlohmann::json& j) {
    const std::string kind = j.value("kind", std::string("uniform_area"));
    if (kind == "uniform_area") return uniform_area();
    if (kind != "custom") throw ConfigError("unknown contact density kind '" + kind + "'");
    std::vector<std::pair<double, double>> table;
    try {
        for (const auto& e : j.at("table")) table.emplace_back(e.at(0).get<double>(), e.at(1).get<double>());
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed density table: ") + e.what());
    }
    return custom(std::move(table));
}

std::vector<QuadratureNode> quadrature_nodes(const std::vector<double>& grid, const ContactDensity& density,
                                             const Interval& interval, double max_gap_ft) {
    if (!(interval.lo < interval.hi)) throw ParameterError("integration interval must have lo < hi");
    std::vector<double> inside;
    for (double g : grid) {
        const bool above_lo = interval.include_lo ? g >= interval.lo - 1e-9 : g > interval.lo + 1e-9;
        if (above_lo && g <= interval.hi + 1e-9) inside.push_back(g);
    }
    if (inside.empty())
        throw CoverageError("no grid distance inside [" + std::to_string(interval.lo) + ", " +
                            std::to_string(interval.hi) + "] ft");

    std::vector<QuadratureNode> nodes;
    if (!same_distance(inside.front(), interval.lo)) nodes.push_back({interval.lo, inside.front(), 0.0});
    for (double g : inside) nodes.push_back({g, g, 0.0});
    if (!same_distance(inside.back(), interval.hi)) nodes.push_back({interval.hi, inside.back(), 0.0});

    for (std::size_t i = 1; i < nodes.size(); ++i) {
        const double gap = nodes[i].s_ft - nodes[i - 1].s_ft;
        if (gap > max_gap_ft + 1e-9)
            throw CoverageError("grid gap of " + std::to_string(gap) + " ft near " + std::to_string(nodes[i].s_ft) +
                                " ft exceeds the allowed " + std::to_string(max_gap_ft) + " ft");
    }
    if (nodes.size() == 1) {
        nodes.front().weight = density(nodes.front().s_ft) * (interval.hi - interval.lo);
        return nodes;
    }
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const double left = i == 0 ? nodes[i].s_ft : nodes[i - 1].s_ft;
        const double right = i + 1 == nodes.size() ? nodes[i].s_ft : nodes[i + 1].s_ft;
        nodes[i].weight = density(nodes[i].s_ft) * 0.5 * (right - left);
    }
    return nodes;
}

namespace {

// grid distance -> summed quadrature weight, ascending by distance
std::vector<std::pair<double, double>> grid_weights(const ConditionalPdfBank& bank, const ContactDensity& density,
                                                    const CarriagePair& c, const Interval& interval,
                                                    double max_gap_ft) {
    const auto nodes = quadrature_nodes(bank.grid(c), density, interval, max_gap_ft);
    std::vector<std::pair<double, double>> out;
    double total = 0.0;
    for (const auto& n : nodes) {
        if (out.empty() || !same_distance(out.back().first, n.grid_ft))
            out.emplace_back(n.grid_ft, n.weight);
        else
            out.back().second += n.weight;
        total += n.weight;
    }
    if (!(total > 0.0))
        throw EstimationError("contact density integrates to zero over [" + std::to_string(interval.lo) + ", " +
                              std::to_string(interval.hi) + "] ft");
    return out;
}

}  // namespace

EmpiricalPdf mixture_pdf(const ConditionalPdfBank& bank, const ContactDensity& density, const CarriagePair& c,
                         const Interval& interval, double max_gap_ft) {
    std::vector<std::pair<double, const EmpiricalPdf*>> terms;
    for (const auto& [s, w] : grid_weights(bank, density, c, interval, max_gap_ft))
        terms.emplace_back(w, &bank.pdf(c, s));
    return weighted_sum(terms);
}

StratifiedPdf mixture_stratified(const ConditionalPdfBank& bank, const ContactDensity& density,
                                 const CarriagePair& c, const Interval& interval, double max_gap_ft) {
    std::vector<Stratum> strata;
    for (const auto& [s, w] : grid_weights(bank, density, c, interval, max_gap_ft)) {
        if (w <= 0.0) continue;
        for (const auto& st : bank.at(c, s).strata()) {
            std::ostringstream label;
            label << s << "ft:" << st.label;
            strata.push_back({label.str(), w * st.weight, st.pdf});
        }
    }
    return StratifiedPdf(std::move(strata));
}

HypothesisPdfs HypothesisPdfs::from_pdfs(EmpiricalPdf h1, EmpiricalPdf h0, double boundary_ft, double max_range_ft) {
    if (!(boundary_ft < max_range_ft)) throw ParameterError("boundary must be below the maximum range");
    return {StratifiedPdf::single(std::move(h1)), StratifiedPdf::single(std::move(h0)), boundary_ft, max_range_ft};
}

HypothesisPdfs build_hypotheses(const ConditionalPdfBank& bank, const ContactDensity& density,
                                const CarriagePair& c, const HypothesisOptions& options) {
    if (!(options.boundary_ft > 0.0 && options.boundary_ft < options.max_range_ft))
        throw ParameterError("need 0 < boundary < max_range");
    HypothesisPdfs h;
    h.boundary_ft = options.boundary_ft;
    h.max_range_ft = options.max_range_ft;
    h.h1 = mixture_stratified(bank, density, c, {0.0, options.boundary_ft, true}, options.max_gap_ft);
    h.h0 = mixture_stratified(bank, density, c, {options.boundary_ft, options.max_range_ft, false},
                              options.max_gap_ft);
    return h;
}

}  // namespace tcftl
