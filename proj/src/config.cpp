#include "tcftl/config.hpp"

#include <fstream>
#include <sstream>

#include "tcftl/errors.hpp"

namespace tcftl {

LookModel RunConfig::looks() const {
    const int per = sampling.recorded_per_scan();
    if (n < 1) throw ParameterError("n must be >= 1");
    if (n % per != 0)
        throw ParameterError("n = " + std::to_string(n) + " is not a multiple of " + std::to_string(per) +
                             " recorded values per scan");
    return looks(n / per, sampling.samples_per_scan);
}

LookModel RunConfig::looks(int scans, int per_scan) const {
    LookModel m;
    m.scan = scan;
    m.scan.scans_per_window = scans;
    m.sampling = sampling;
    m.sampling.samples_per_scan = per_scan;
    m.censor = censor;
    m.validate();
    return m;
}

EvaluationSettings RunConfig::evaluation() const {
    EvaluationSettings s;
    s.looks = looks();
    s.tabulate.method = parse_pd_method(pd_method);
    s.tabulate.mc.trials = trials;
    s.tabulate.mc.seed = seed;
    s.tabulate.mc.threads = threads;
    s.hypotheses = hypotheses;
    s.density = density;
    s.cognitive_step = cognitive_step;
    s.threads = threads;
    return s;
}

void RunConfig::validate() const {
    if (!bank.empty() && !datasets.empty()) throw ConfigError("give either a PDF bank or datasets, not both");
    for (const auto& p : datasets)
        if (!std::filesystem::exists(p)) throw ConfigError("dataset not found: " + p);
    for (const auto& p : {schema, bank})
        if (!p.empty() && !std::filesystem::exists(p)) throw ConfigError("file not found: " + p);
    if (!deltas.empty() && deltas != "estimate" && !std::filesystem::exists(deltas))
        throw ConfigError("bulk delta file not found: " + deltas);
    if (!(extend_base_ft > 0.0)) throw ParameterError("extend_base_ft must be > 0");
    if (!(path_loss_exponent > 0.0)) throw ParameterError("path_loss_exponent must be > 0");
    if (pdf_epsilon < 0.0) throw ParameterError("pdf_epsilon must be >= 0");
    if (!(hypotheses.boundary_ft > 0.0 && hypotheses.boundary_ft < hypotheses.max_range_ft))
        throw ParameterError("need 0 < boundary_ft < max_range_ft");
    if (!(hypotheses.max_gap_ft > 0.0)) throw ParameterError("max_gap_ft must be > 0");
    if (!(p_hand >= 0.0 && p_hand <= 1.0 && p_standing >= 0.0 && p_standing <= 1.0))
        throw ParameterError("p_hand and p_standing must lie in [0, 1]");
    if (!carriage.empty()) {
        try {
            parse_carriage_pair(carriage);
        } catch (const InputError& e) {
            throw ConfigError(std::string("bad carriage: ") + e.what());
        }
    }
    parse_det_mode(mode);
    parse_pd_method(pd_method);
    looks();
    if (look_configs.empty()) throw ParameterError("look_configs must not be empty");
    for (const auto& c : look_configs)
        if (c.scans < 1 || c.samples_per_scan < 1) throw ParameterError("look configs need scans, samples >= 1");
    if (!(fdr_target > 0.0 && fdr_target < 1.0)) throw ParameterError("fdr_target must lie in (0, 1)");
    if (!(target_pd > 0.0 && target_pd < 1.0)) throw ParameterError("target_pd must lie in (0, 1)");
    if (trials < 1) throw ParameterError("trials must be >= 1");
    if (!(cognitive_step > 0.0 && cognitive_step < 1.0)) throw ParameterError("cognitive_step must lie in (0, 1)");
    if (!(distance_ft > 0.0)) throw ParameterError("distance_ft must be > 0");
    if (windows < 1) throw ParameterError("windows must be >= 1");
    if (threads < 1) throw ParameterError("threads must be >= 1");
}

nlohmann::json RunConfig::to_json() const {
    nlohmann::json looks_json = nlohmann::json::array();
    for (const auto& c : look_configs) looks_json.push_back(to_string(c));
    return {{"datasets", datasets},
            {"schema", schema},
            {"bank", bank},
            {"deltas", deltas},
            {"extend_to", extend_to},
            {"extend_base_ft", extend_base_ft},
            {"path_loss_exponent", path_loss_exponent},
            {"reference_tx", reference_tx},
            {"censor", censor},
            {"strict", strict},
            {"pdf_epsilon", pdf_epsilon},
            {"boundary_ft", hypotheses.boundary_ft},
            {"max_range_ft", hypotheses.max_range_ft},
            {"max_gap_ft", hypotheses.max_gap_ft},
            {"density", density.to_json()},
            {"prior", prior},
            {"p_hand", p_hand},
            {"p_standing", p_standing},
            {"carriage", carriage},
            {"scan", scan.to_json()},
            {"sampling", sampling.to_json()},
            {"mode", mode},
            {"n", n},
            {"look_configs", looks_json},
            {"fdr_target", fdr_target},
            {"target_pd", target_pd},
            {"seed", seed},
            {"trials", trials},
            {"pd_method", pd_method},
            {"cognitive_step", cognitive_step},
            {"distance_ft", distance_ft},
            {"windows", windows},
            {"output_dir", output_dir},
            {"svg", svg}};
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("run config must be a JSON object");
    RunConfig c;
    try {
        auto get = [&](const char* key, auto& field) {
            if (j.contains(key)) j.at(key).get_to(field);
        };
        get("datasets", c.datasets);
        if (j.contains("dataset")) c.datasets.push_back(j.at("dataset").get<std::string>());
        get("schema", c.schema);
        get("bank", c.bank);
        get("deltas", c.deltas);
        get("extend_to", c.extend_to);
        get("extend_base_ft", c.extend_base_ft);
        get("path_loss_exponent", c.path_loss_exponent);
        get("reference_tx", c.reference_tx);
        get("censor", c.censor);
        get("strict", c.strict);
        get("pdf_epsilon", c.pdf_epsilon);
        get("boundary_ft", c.hypotheses.boundary_ft);
        get("max_range_ft", c.hypotheses.max_range_ft);
        get("max_gap_ft", c.hypotheses.max_gap_ft);
        if (j.contains("density")) c.density = ContactDensity::from_json(j.at("density"));
        get("prior", c.prior);
        get("p_hand", c.p_hand);
        get("p_standing", c.p_standing);
        get("carriage", c.carriage);
        // Partial scan/sampling objects only override the keys they name.
        if (j.contains("scan")) {
            auto merged = c.scan.to_json();
            merged.update(j.at("scan"));
            c.scan = ScanModel::from_json(merged);
        }
        if (j.contains("sampling")) {
            auto merged = c.sampling.to_json();
            merged.update(j.at("sampling"));
            c.sampling = SamplingModel::from_json(merged);
        }
        get("mode", c.mode);
        get("n", c.n);
        if (j.contains("look_configs")) {
            c.look_configs.clear();
            for (const auto& s : j.at("look_configs")) c.look_configs.push_back(parse_look_config(s.get<std::string>()));
        }
        get("fdr_target", c.fdr_target);
        get("target_pd", c.target_pd);
        get("seed", c.seed);
        get("trials", c.trials);
        get("pd_method", c.pd_method);
        get("cognitive_step", c.cognitive_step);
        get("distance_ft", c.distance_ft);
        get("windows", c.windows);
        get("output_dir", c.output_dir);
        get("svg", c.svg);
        get("threads", c.threads);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed run config: ") + e.what());
    }
    return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    try {
        return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    }
}

// Ingest every dataset, normalize tx power, then apply pose synthesis and
// range extension when configured.
Dataset prepare_dataset(const RunConfig& cfg, IngestReport& report) {
    if (cfg.datasets.empty()) throw ConfigError("no dataset given");
    CsvSchema schema;
    if (!cfg.schema.empty()) {
        std::ifstream in(cfg.schema);
        try {
            schema = CsvSchema::from_json(nlohmann::json::parse(in));
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("bad schema file: " + std::string(e.what()));
        }
    }
    IngestOptions opt;
    opt.strict = cfg.strict;
    opt.censor = cfg.censor;

    std::vector<RssiSample> samples;
    for (const auto& path : cfg.datasets) {
        auto r = ingest_csv(path, schema, opt);
        samples.insert(samples.end(), r.dataset.samples().begin(), r.dataset.samples().end());
        report.rows_read += r.report.rows_read;
        report.rows_accepted += r.report.rows_accepted;
        report.rows_censored += r.report.rows_censored;
        for (auto issue : r.report.errors) {
            if (cfg.datasets.size() > 1) issue.message = path + ": " + issue.message;
            report.errors.push_back(std::move(issue));
        }
    }
    if (samples.empty()) throw InputError("no valid rows in the input datasets");

    Dataset d = normalize_tx(Dataset(std::move(samples)), cfg.reference_tx);
    AugmentOptions aug;
    aug.censor = cfg.censor;
    if (!cfg.deltas.empty()) {
        BulkDeltas deltas;
        if (cfg.deltas == "estimate") {
            deltas = estimate_all_bulk_deltas(d);
        } else {
            std::ifstream in(cfg.deltas);
            try {
                deltas = BulkDeltas::from_json(nlohmann::json::parse(in));
            } catch (const nlohmann::json::exception& e) {
                throw ConfigError("bad bulk-delta file: " + std::string(e.what()));
            }
        }
        d = synthesize_pose(d, deltas, aug);
    }
    for (double t : cfg.extend_to)
        d = extend_range(d, cfg.extend_base_ft, t, cfg.path_loss_exponent, cfg.hypotheses.max_range_ft, aug);
    return d;
}

ConditionalPdfBank load_bank(const RunConfig& cfg, IngestReport& report) {
    if (!cfg.bank.empty()) {
        std::ifstream in(cfg.bank);
        try {
            return ConditionalPdfBank::from_json(nlohmann::json::parse(in));
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("bad PDF bank: " + std::string(e.what()));
        }
    }
    const Dataset d = prepare_dataset(cfg, report);
    PdfOptions opt;
    opt.epsilon = cfg.pdf_epsilon;
    return estimate_bank(d, opt);
}

LookConfig parse_look_config(const std::string& text) {
    LookConfig c;
    std::istringstream in(text);
    char x = 0;
    if (!(in >> c.scans)) throw ConfigError("bad look config '" + text + "'");
    if (in >> x) {
        if (x != 'x' || !(in >> c.samples_per_scan)) throw ConfigError("bad look config '" + text + "'");
    } else {
        c.samples_per_scan = 1;
    }
    std::string rest;
    if (in >> rest) throw ConfigError("bad look config '" + text + "'");
    if (c.scans < 1 || c.samples_per_scan < 1) throw ConfigError("look config counts must be >= 1");
    return c;
}

std::string to_string(const LookConfig& c) {
    return std::to_string(c.scans) + "x" + std::to_string(c.samples_per_scan);
}

}  // namespace tcftl
