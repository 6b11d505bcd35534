#include "tcftl/measurements.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

#include "tcftl/csv.hpp"
#include "tcftl/errors.hpp"

namespace tcftl {

namespace {

std::string normalize_token(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (char ch : text) {
        if (ch == '-' || ch == ' ') {
            out.push_back('_');
        } else {
            out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
        }
    }
    while (!out.empty() && out.front() == '_') out.erase(out.begin());
    while (!out.empty() && out.back() == '_') out.pop_back();
    return out;
}

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::optional<long> parse_integer(std::string_view text) {
    std::string t = trim(text);
    if (!t.empty() && t.front() == '+') t.erase(t.begin());
    long value = 0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
    if (t.empty() || ec != std::errc{} || ptr != t.data() + t.size()) return std::nullopt;
    return value;
}

std::optional<double> parse_real(std::string_view text) {
    std::string t = trim(text);
    if (t.empty()) return std::nullopt;
    char* end = nullptr;
    double v = std::strtod(t.c_str(), &end);
    if (end != t.c_str() + t.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

// Integer-valued reals such as "-63.0" are accepted as RSSI; "-63.4" is not.
std::optional<int> parse_db(std::string_view text) {
    if (auto i = parse_integer(text)) return static_cast<int>(*i);
    auto r = parse_real(text);
    if (!r || std::floor(*r) != *r) return std::nullopt;
    return static_cast<int>(*r);
}

bool parse_bool(std::string_view text) {
    std::string t = normalize_token(text);
    return t == "1" || t == "true" || t == "yes" || t == "y";
}

}  // namespace

std::string to_string(Posture p) { return p == Posture::Standing ? "standing" : "sitting"; }

std::string to_string(Holding h) {
    switch (h) {
        case Holding::Hand: return "hand";
        case Holding::FrontPantsPocket: return "front_pants_pocket";
        case Holding::BackPantsPocket: return "back_pants_pocket";
        case Holding::ShirtPocket: return "shirt_pocket";
        case Holding::Bag: return "bag";
    }
    return "hand";
}

std::string to_string(Channel c) {
    switch (c) {
        case Channel::Low: return "low";
        case Channel::Mid: return "mid";
        case Channel::High: return "high";
        case Channel::Unknown: return "unknown";
    }
    return "unknown";
}

std::string to_string(const CarriageState& s) { return to_string(s.posture) + ":" + to_string(s.holding); }

std::string to_string(const CarriagePair& c) { return to_string(c.user1) + "/" + to_string(c.user2); }

Posture parse_posture(std::string_view text) {
    const std::string t = normalize_token(text);
    if (t == "standing" || t == "stand") return Posture::Standing;
    if (t == "sitting" || t == "sit") return Posture::Sitting;
    throw InputError("unknown posture '" + std::string(text) + "'");
}

Holding parse_holding(std::string_view text) {
    const std::string t = normalize_token(text);
    if (t == "hand" || t == "in_hand") return Holding::Hand;
    if (t == "front_pants_pocket" || t == "pants_pocket" || t == "front_pocket" || t == "pants")
        return Holding::FrontPantsPocket;
    if (t == "back_pants_pocket" || t == "back_pocket") return Holding::BackPantsPocket;
    if (t == "shirt_pocket" || t == "front_shirt_pocket" || t == "shirt") return Holding::ShirtPocket;
    if (t == "bag" || t == "purse") return Holding::Bag;
    throw InputError("unknown holding '" + std::string(text) + "'");
}

Channel parse_channel(std::string_view text) {
    const std::string t = normalize_token(text);
    if (t.empty() || t == "unknown") return Channel::Unknown;
    if (t == "low" || t == "37" || t == "2402") return Channel::Low;
    if (t == "mid" || t == "38" || t == "2426") return Channel::Mid;
    if (t == "high" || t == "39" || t == "2480") return Channel::High;
    throw InputError("unknown channel '" + std::string(text) + "'");
}

CarriageState parse_carriage_state(std::string_view text) {
    const auto sep = text.find(':');
    if (sep == std::string_view::npos)
        throw InputError("carriage state '" + std::string(text) + "' is not posture:holding");
    return {parse_posture(text.substr(0, sep)), parse_holding(text.substr(sep + 1))};
}

CarriagePair parse_carriage_pair(std::string_view text) {
    const auto sep = text.find('/');
    if (sep == std::string_view::npos)
        throw InputError("carriage pair '" + std::string(text) + "' is not state/state");
    return {parse_carriage_state(text.substr(0, sep)), parse_carriage_state(text.substr(sep + 1))};
}

std::vector<CarriagePair> measured_carriage_pairs() {
    using H = Holding;
    using P = Posture;
    return {
        {{P::Standing, H::Bag}, {P::Sitting, H::Hand}},
        {{P::Standing, H::ShirtPocket}, {P::Standing, H::Hand}},
        {{P::Standing, H::FrontPantsPocket}, {P::Sitting, H::ShirtPocket}},
        {{P::Standing, H::Hand}, {P::Standing, H::FrontPantsPocket}},
        {{P::Standing, H::FrontPantsPocket}, {P::Standing, H::FrontPantsPocket}},
        {{P::Sitting, H::Hand}, {P::Sitting, H::Hand}},
    };
}

int quantize_db(double value) { return static_cast<int>(std::round(value)); }

bool is_valid_pose(int degrees) { return degrees >= 0 && degrees < 360 && degrees % kPoseStepDeg == 0; }

bool same_distance(double a, double b) { return std::abs(a - b) < 1e-6; }

std::vector<double> Dataset::distances(const CarriagePair& c) const {
    std::vector<double> out;
    for (const auto& s : samples_) {
        if (s.carriage != c) continue;
        if (std::none_of(out.begin(), out.end(), [&](double d) { return same_distance(d, s.distance_ft); }))
            out.push_back(s.distance_ft);
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<CarriagePair> Dataset::carriage_pairs() const {
    std::vector<CarriagePair> out;
    for (const auto& s : samples_)
        if (std::find(out.begin(), out.end(), s.carriage) == out.end()) out.push_back(s.carriage);
    return out;
}

CsvSchema CsvSchema::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("schema mapping must be a JSON object");
    CsvSchema s;
    auto take = [&](const char* key, std::string& field) {
        if (auto it = j.find(key); it != j.end()) {
            if (!it->is_string()) throw ConfigError(std::string("schema field '") + key + "' must be a string");
            field = it->get<std::string>();
        }
    };
    take("rssi", s.rssi);
    take("tx_power", s.tx_power);
    take("distance", s.distance);
    take("carriage_user1", s.carriage_user1);
    take("carriage_user2", s.carriage_user2);
    take("pose_user1", s.pose_user1);
    take("pose_user2", s.pose_user2);
    take("channel", s.channel);
    take("synthetic", s.synthetic);
    return s;
}

nlohmann::json CsvSchema::to_json() const {
    return {{"rssi", rssi},
            {"tx_power", tx_power},
            {"distance", distance},
            {"carriage_user1", carriage_user1},
            {"carriage_user2", carriage_user2},
            {"pose_user1", pose_user1},
            {"pose_user2", pose_user2},
            {"channel", channel},
            {"synthetic", synthetic}};
}

void IngestReport::write(std::ostream& os) const {
    for (const auto& e : errors) os << "line " << e.line << ": " << e.message << '\n';
    os << "rows=" << rows_read << " accepted=" << rows_accepted << " censored=" << rows_censored
       << " errors=" << errors.size() << '\n';
}

IngestResult ingest_csv_text(std::string_view text, const CsvSchema& schema, const IngestOptions& options,
                             std::string provenance) {
    CsvReader reader(text);
    std::vector<std::string> header;
    if (!reader.next(header)) throw SchemaError("CSV is empty; a header row is required");
    for (auto& h : header) h = trim(h);
    if (!header.empty() && header.front().rfind("\xEF\xBB\xBF", 0) == 0) header.front().erase(0, 3);

    auto column = [&](const std::string& name, bool required) -> std::optional<std::size_t> {
        if (name.empty()) {
            if (required) throw SchemaError("required column mapping is empty");
            return std::nullopt;
        }
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) {
            if (required) throw SchemaError("missing column '" + name + "'");
            return std::nullopt;
        }
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t c_rssi = *column(schema.rssi, true);
    const std::size_t c_tx = *column(schema.tx_power, true);
    const std::size_t c_dist = *column(schema.distance, true);
    const std::size_t c_car1 = *column(schema.carriage_user1, true);
    const std::size_t c_car2 = *column(schema.carriage_user2, true);
    const std::size_t c_pose1 = *column(schema.pose_user1, true);
    const std::size_t c_pose2 = *column(schema.pose_user2, true);
    const auto c_chan = column(schema.channel, false);
    const auto c_syn = column(schema.synthetic, false);

    IngestResult result;
    std::vector<RssiSample> samples;
    std::vector<std::string> row;
    while (reader.next(row)) {
        const std::size_t line = reader.line();
        if (row.size() == 1 && trim(row[0]).empty()) continue;
        ++result.report.rows_read;
        try {
            if (row.size() != header.size())
                throw RowError(line, "expected " + std::to_string(header.size()) + " fields, found " +
                                         std::to_string(row.size()));
            RssiSample s;
            auto rssi = parse_db(row[c_rssi]);
            if (!rssi) throw RowError(line, "rssi '" + trim(row[c_rssi]) + "' is not an integer dB value");
            s.rssi = *rssi;
            auto tx = parse_db(row[c_tx]);
            if (!tx) throw RowError(line, "tx_power '" + trim(row[c_tx]) + "' is not an integer dB value");
            s.tx_power = *tx;
            auto dist = parse_real(row[c_dist]);
            if (!dist) throw RowError(line, "distance '" + trim(row[c_dist]) + "' is not a number");
            if (*dist <= 0.0) throw RowError(line, "distance must be positive");
            s.distance_ft = *dist;
            for (auto [col, dst] : {std::pair{c_pose1, &s.pose_user1}, std::pair{c_pose2, &s.pose_user2}}) {
                auto pose = parse_integer(row[col]);
                if (!pose) {
                    auto r = parse_real(row[col]);
                    if (r && std::floor(*r) == *r) pose = static_cast<long>(*r);
                }
                if (!pose || !is_valid_pose(static_cast<int>(*pose)))
                    throw RowError(line, "pose angle '" + trim(row[col]) + "' is not on the 45 degree grid");
                *dst = static_cast<int>(*pose);
            }
            try {
                s.carriage.user1 = parse_carriage_state(trim(row[c_car1]));
                s.carriage.user2 = parse_carriage_state(trim(row[c_car2]));
                if (c_chan) s.channel = parse_channel(trim(row[*c_chan]));
            } catch (const InputError& e) {
                throw RowError(line, e.what());
            }
            if (c_syn) s.synthetic = parse_bool(row[*c_syn]);

            if (options.censor && s.rssi < options.sensitivity_floor) {
                ++result.report.rows_censored;
                continue;
            }
            samples.push_back(s);
            ++result.report.rows_accepted;
        } catch (const RowError& e) {
            if (options.strict) throw;
            std::string msg = e.what();
            const std::string prefix = "line " + std::to_string(line) + ": ";
            if (msg.rfind(prefix, 0) == 0) msg.erase(0, prefix.size());
            result.report.errors.push_back({line, msg});
        }
    }
    result.dataset = Dataset(std::move(samples), std::move(provenance));
    return result;
}

IngestResult ingest_csv(const std::filesystem::path& path, const CsvSchema& schema, const IngestOptions& options) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return ingest_csv_text(buf.str(), schema, options, path.string());
}

void write_dataset_csv(std::ostream& os, const Dataset& d) {
    const CsvSchema s;
    os << s.rssi << ',' << s.tx_power << ',' << s.distance << ',' << s.carriage_user1 << ',' << s.carriage_user2
       << ',' << s.pose_user1 << ',' << s.pose_user2 << ',' << s.channel << ',' << s.synthetic << '\n';
    for (const auto& x : d.samples()) {
        std::ostringstream dist;
        dist << std::setprecision(10) << x.distance_ft;
        os << x.rssi << ',' << x.tx_power << ',' << dist.str() << ',' << to_string(x.carriage.user1) << ','
           << to_string(x.carriage.user2) << ',' << x.pose_user1 << ',' << x.pose_user2 << ','
           << to_string(x.channel) << ',' << (x.synthetic ? 1 : 0) << '\n';
    }
}

Dataset normalize_tx(const Dataset& d, int reference_tx) {
    std::vector<RssiSample> out = d.samples();
    for (auto& s : out) {
        s.rssi += reference_tx - s.tx_power;
        s.tx_power = reference_tx;
    }
    return Dataset(std::move(out), d.provenance());
}

void BulkDeltas::set(const CarriageState& c, int pose_deg, double delta_db) {
    if (!is_valid_pose(pose_deg)) throw ConfigError("bulk delta pose " + std::to_string(pose_deg) + " is off-grid");
    table_[{c, pose_deg}] = delta_db;
}

std::optional<double> BulkDeltas::get(const CarriageState& c, int pose_deg) const {
    auto it = table_.find({c, pose_deg});
    if (it == table_.end()) return std::nullopt;
    return it->second;
}

bool BulkDeltas::covers(const CarriageState& c) const {
    for (int a = 0; a < 360; a += kPoseStepDeg)
        if (!table_.count({c, a})) return false;
    return true;
}

BulkDeltas BulkDeltas::from_json(const nlohmann::json& j) {
    // {"standing:hand": {"0": 0.0, "45": -1.5, ...}, ...}
    if (!j.is_object()) throw ConfigError("bulk delta table must be a JSON object");
    BulkDeltas out;
    for (const auto& [state, angles] : j.items()) {
        CarriageState c;
        try {
            c = parse_carriage_state(state);
        } catch (const InputError& e) {
            throw ConfigError(e.what());
        }
        if (!angles.is_object()) throw ConfigError("bulk deltas for '" + state + "' must be an object");
        for (const auto& [angle, value] : angles.items()) {
            auto a = parse_integer(angle);
            if (!a || !value.is_number()) throw ConfigError("bad bulk delta entry for '" + state + "'");
            out.set(c, static_cast<int>(*a), value.get<double>());
        }
    }
    return out;
}

nlohmann::json BulkDeltas::to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [key, value] : table_) j[to_string(key.first)][std::to_string(key.second)] = value;
    return j;
}

Dataset synthesize_pose(const Dataset& d, const BulkDeltas& deltas, const AugmentOptions& options) {
    std::set<CarriageState> missing;
    for (const auto& s : d.samples())
        if (!s.synthetic && !deltas.covers(s.carriage.user2)) missing.insert(s.carriage.user2);
    if (!missing.empty()) {
        std::string msg = "bulk delta table lacks full angular coverage for:";
        for (const auto& c : missing) msg += " " + to_string(c);
        throw ConfigError(msg);
    }

    std::vector<RssiSample> out;
    out.reserve(d.size() * kPoseCount);
    for (const auto& s : d.samples()) {
        out.push_back(s);
        if (s.synthetic) continue;
        const double base = *deltas.get(s.carriage.user2, s.pose_user2);
        for (int a = 0; a < 360; a += kPoseStepDeg) {
            if (a == s.pose_user2) continue;
            RssiSample syn = s;
            syn.pose_user2 = a;
            syn.synthetic = true;
            syn.rssi = quantize_db(s.rssi + *deltas.get(s.carriage.user2, a) - base);
            if (options.censor && syn.rssi < options.sensitivity_floor) continue;
            out.push_back(syn);
        }
    }
    return Dataset(std::move(out), d.provenance());
}

std::map<int, double> estimate_bulk_deltas(const Dataset& d, const CarriageState& carriage) {
    // distance bucket -> angle -> (sum, count)
    std::vector<std::pair<double, std::map<int, std::pair<double, std::size_t>>>> by_range;
    for (const auto& s : d.samples()) {
        if (s.synthetic || s.carriage.user1 != carriage) continue;
        auto it = std::find_if(by_range.begin(), by_range.end(),
                               [&](const auto& r) { return same_distance(r.first, s.distance_ft); });
        if (it == by_range.end()) {
            by_range.push_back({s.distance_ft, {}});
            it = std::prev(by_range.end());
        }
        auto& acc = it->second[s.pose_user1];
        acc.first += s.rssi;
        acc.second += 1;
    }

    std::map<int, double> diff_sum;
    std::map<int, std::size_t> diff_count;
    for (const auto& [dist, angles] : by_range) {
        auto ref = angles.find(0);
        if (ref == angles.end()) continue;
        const double ref_mean = ref->second.first / static_cast<double>(ref->second.second);
        for (const auto& [angle, acc] : angles) {
            diff_sum[angle] += acc.first / static_cast<double>(acc.second) - ref_mean;
            diff_count[angle] += 1;
        }
    }

    std::map<int, double> out;
    std::string absent;
    for (int a = 0; a < 360; a += kPoseStepDeg) {
        if (!diff_count.count(a)) {
            absent += " " + std::to_string(a);
            continue;
        }
        out[a] = a == 0 ? 0.0 : diff_sum[a] / static_cast<double>(diff_count[a]);
    }
    if (!absent.empty())
        throw EstimationError("no user-1 measurements for " + to_string(carriage) + " at angles:" + absent);
    return out;
}

BulkDeltas estimate_all_bulk_deltas(const Dataset& d) {
    std::set<CarriageState> states;
    for (const auto& s : d.samples())
        if (!s.synthetic) states.insert(s.carriage.user1);
    BulkDeltas out;
    for (const auto& c : states) {
        std::map<int, double> deltas;
        try {
            deltas = estimate_bulk_deltas(d, c);
        } catch (const EstimationError&) {
            continue;
        }
        for (const auto& [a, v] : deltas) out.set(c, a, v);
    }
    return out;
}

double excess_path_loss_db(double base_ft, double target_ft, double path_loss_exponent) {
    return 10.0 * path_loss_exponent * std::log10(target_ft / base_ft);
}

Dataset extend_range(const Dataset& d, double base_ft, double target_ft, double path_loss_exponent,
                     double max_range_ft, const AugmentOptions& options) {
    if (!(base_ft > 0.0)) throw ParameterError("base range must be positive");
    if (target_ft < base_ft && !same_distance(target_ft, base_ft))
        throw ParameterError("target range must not be below the base range");
    if (target_ft > max_range_ft + 1e-9) throw ParameterError("target range exceeds the maximum BLE range");
    if (!(path_loss_exponent > 0.0)) throw ParameterError("path loss exponent must be positive");

    std::vector<const RssiSample*> base;
    for (const auto& s : d.samples())
        if (same_distance(s.distance_ft, base_ft)) base.push_back(&s);
    if (base.empty()) throw CoverageError("no samples at the base range " + std::to_string(base_ft) + " ft");
    if (same_distance(target_ft, base_ft)) return d;

    const double loss = excess_path_loss_db(base_ft, target_ft, path_loss_exponent);
    std::vector<RssiSample> out = d.samples();
    for (const RssiSample* s : base) {
        RssiSample x = *s;
        x.distance_ft = target_ft;
        x.rssi = quantize_db(s->rssi - loss);
        x.synthetic = true;
        if (options.censor && x.rssi < options.sensitivity_floor) continue;
        out.push_back(x);
    }
    return Dataset(std::move(out), d.provenance());
}

}  // namespace tcftl
