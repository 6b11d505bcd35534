// tcftl: command-line workbench for "too close for too long" detectors.
//
//   tcftl ingest   --dataset raw.csv --deltas estimate --extend-to 20 --out run/
//   tcftl estimate --dataset raw.csv --out run/
//   tcftl det      --bank run/bank.json --mode cognitive --n 6
//   tcftl fdr      --bank run/bank.json --mode agnostic --prior factored
//   tcftl sweep    --bank run/bank.json --mode cognitive --looks 6x1,6x4
//   tcftl optimize --bank run/bank.json --target-pd 0.6
//   tcftl simulate --bank run/bank.json --carriage standing:hand/standing:hand --distance 3
//
// Settings come from --config (JSON) and are overridden by flags. Every data
// file gets a <name>.meta.json sidecar with the resolved configuration.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "tcftl/config.hpp"
#include "tcftl/errors.hpp"
#include "tcftl/evaluation.hpp"
#include "tcftl/parallel.hpp"
#include "tcftl/plot.hpp"

namespace fs = std::filesystem;
using namespace tcftl;

namespace {

enum ExitCode { kOk = 0, kValidation = 1, kConfig = 2, kInfeasible = 3 };

// Flags are bound to private storage and applied on top of the config file
// only when they were actually given.
class Overrides {
  public:
    template <typename T>
    void add(CLI::App* app, const std::string& name, const std::string& help,
             std::function<void(RunConfig&, const T&)> apply) {
        auto value = std::make_shared<T>();
        CLI::Option* opt = app->add_option(name, *value, help);
        items_.push_back({opt, [value, apply](RunConfig& c) { apply(c, *value); }});
    }

    void flag(CLI::App* app, const std::string& name, const std::string& help, std::function<void(RunConfig&)> apply) {
        CLI::Option* opt = app->add_flag(name, help);
        items_.push_back({opt, std::move(apply)});
    }

    void apply(RunConfig& c) const {
        for (const auto& [opt, fn] : items_)
            if (opt->count() > 0) fn(c);
    }

  private:
    std::vector<std::pair<CLI::Option*, std::function<void(RunConfig&)>>> items_;
};

struct Command {
    CLI::App* app = nullptr;
    std::string config_path;
    Overrides overrides;
};

void add_common(Command& cmd) {
    CLI::App* a = cmd.app;
    auto& o = cmd.overrides;
    a->add_option("--config", cmd.config_path, "JSON run config");
    o.add<std::vector<std::string>>(a, "--dataset", "measurement CSV (repeatable)",
                                    [](RunConfig& c, const auto& v) { c.datasets = v; });
    o.add<std::string>(a, "--schema", "JSON column mapping", [](RunConfig& c, const auto& v) { c.schema = v; });
    o.add<std::string>(a, "--bank", "serialized PDF bank", [](RunConfig& c, const auto& v) { c.bank = v; });
    o.add<std::string>(a, "--deltas", "bulk-delta JSON or 'estimate'", [](RunConfig& c, const auto& v) { c.deltas = v; });
    o.add<std::vector<double>>(a, "--extend-to", "synthesize ranges (ft) by path-loss shift",
                               [](RunConfig& c, const auto& v) { c.extend_to = v; });
    o.add<double>(a, "--extend-base", "base range (ft) for extension",
                  [](RunConfig& c, const auto& v) { c.extend_base_ft = v; });
    o.add<double>(a, "--path-loss-exponent", "log-distance exponent",
                  [](RunConfig& c, const auto& v) { c.path_loss_exponent = v; });
    o.add<int>(a, "--reference-tx", "normalize rssi to this tx power (dBm)",
               [](RunConfig& c, const auto& v) { c.reference_tx = v; });
    o.flag(a, "--no-censor", "keep values below the sensitivity floor", [](RunConfig& c) { c.censor = false; });
    o.flag(a, "--strict", "abort on the first bad CSV row", [](RunConfig& c) { c.strict = true; });
    o.add<double>(a, "--pdf-epsilon", "add-epsilon per PDF bin", [](RunConfig& c, const auto& v) { c.pdf_epsilon = v; });
    o.add<double>(a, "--boundary", "too-close boundary (ft)",
                  [](RunConfig& c, const auto& v) { c.hypotheses.boundary_ft = v; });
    o.add<double>(a, "--max-range", "largest contact range (ft)",
                  [](RunConfig& c, const auto& v) { c.hypotheses.max_range_ft = v; });
    o.add<double>(a, "--max-gap", "largest allowed grid gap (ft)",
                  [](RunConfig& c, const auto& v) { c.hypotheses.max_gap_ft = v; });
    o.add<std::string>(a, "--density", "'uniform-area' or JSON file", [](RunConfig& c, const auto& v) {
        if (v == "uniform-area") {
            c.density = ContactDensity::uniform_area();
            return;
        }
        std::ifstream in(v);
        if (!in) throw ConfigError("cannot open density file " + v);
        c.density = ContactDensity::from_json(nlohmann::json::parse(in));
    });
    o.add<std::string>(a, "--prior", "uniform | factored | single | JSON file",
                       [](RunConfig& c, const auto& v) { c.prior = v; });
    o.add<double>(a, "--p-hand", "factored prior: P(phone in hand)", [](RunConfig& c, const auto& v) { c.p_hand = v; });
    o.add<double>(a, "--p-standing", "factored prior: P(standing)",
                  [](RunConfig& c, const auto& v) { c.p_standing = v; });
    o.add<std::string>(a, "--carriage", "carriage pair, e.g. standing:hand/sitting:bag",
                       [](RunConfig& c, const auto& v) { c.carriage = v; });
    o.add<std::string>(a, "--policy", "first-chirp | all-chirps | min-attenuation",
                       [](RunConfig& c, const auto& v) { c.sampling.policy = parse_recording_policy(v); });
    o.add<int>(a, "--samples-per-scan", "values kept per scan (all-chirps)",
               [](RunConfig& c, const auto& v) { c.sampling.samples_per_scan = v; });
    o.add<std::string>(a, "--correlation", "independent | within-scan",
                       [](RunConfig& c, const auto& v) { c.sampling.correlation = parse_correlation(v); });
    o.add<std::string>(a, "--mode", "m-of-n | one-of-n | agnostic | cognitive",
                       [](RunConfig& c, const auto& v) { c.mode = v; });
    o.add<int>(a, "--n", "recorded values per window", [](RunConfig& c, const auto& v) { c.n = v; });
    o.add<std::string>(a, "--looks", "look configs, e.g. 6x1,6x4", [](RunConfig& c, const auto& v) {
        c.look_configs.clear();
        std::stringstream in(v);
        for (std::string item; std::getline(in, item, ',');) c.look_configs.push_back(parse_look_config(item));
    });
    o.add<double>(a, "--fdr-target", "FDR operating point", [](RunConfig& c, const auto& v) { c.fdr_target = v; });
    o.add<double>(a, "--target-pd", "minimax P_D target", [](RunConfig& c, const auto& v) { c.target_pd = v; });
    o.add<std::uint64_t>(a, "--seed", "random seed", [](RunConfig& c, const auto& v) { c.seed = v; });
    o.add<std::size_t>(a, "--trials", "Monte Carlo trials per table", [](RunConfig& c, const auto& v) { c.trials = v; });
    o.add<std::string>(a, "--pd-method", "auto | exact | monte-carlo", [](RunConfig& c, const auto& v) { c.pd_method = v; });
    o.add<double>(a, "--distance", "simulate: range (ft)", [](RunConfig& c, const auto& v) { c.distance_ft = v; });
    o.add<std::size_t>(a, "--windows", "simulate: windows", [](RunConfig& c, const auto& v) { c.windows = v; });
    o.add<std::string>(a, "--out", "output directory", [](RunConfig& c, const auto& v) { c.output_dir = v; });
    o.flag(a, "--no-svg", "skip SVG plots", [](RunConfig& c) { c.svg = false; });
    o.add<unsigned>(a, "--threads", "worker threads", [](RunConfig& c, const auto& v) { c.threads = v; });
}

RunConfig resolve(const Command& cmd) {
    RunConfig cfg = cmd.config_path.empty() ? RunConfig{} : RunConfig::load(cmd.config_path);
    try {
        cmd.overrides.apply(cfg);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed JSON argument: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

std::string slug(const std::string& s) {
    std::string out;
    for (char ch : s) out += (ch == ':' ? '-' : ch == '/' ? '_' : ch);
    return out;
}

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

class Output {
  public:
    Output(const RunConfig& cfg, std::string command) : cfg_(cfg), command_(std::move(command)) {
        dir_ = cfg.output_dir;
        fs::create_directories(dir_);
    }

    fs::path write(const std::string& name, const std::string& content, nlohmann::json summary = nullptr) {
        const fs::path path = dir_ / name;
        {
            std::ofstream out(path, std::ios::binary);
            if (!out) throw ConfigError("cannot write " + path.string());
            out << content;
        }
        nlohmann::json meta = {{"tool", "tcftl"},
                               {"version", kToolkitVersion},
                               {"command", command_},
                               {"file", name},
                               {"config", cfg_.to_json()}};
        if (!summary.is_null()) meta["summary"] = std::move(summary);
        std::ofstream side(dir_ / (name + ".meta.json"), std::ios::binary);
        side << meta.dump(2) << '\n';
        std::cout << path.string() << '\n';
        return path;
    }

  private:
    const RunConfig& cfg_;
    std::string command_;
    fs::path dir_;
};

ConditionalPdfBank load_bank(const RunConfig& cfg) {
    IngestReport report;
    auto bank = tcftl::load_bank(cfg, report);
    if (!report.ok()) report.write(std::cerr);
    return bank;
}

CarriagePair chosen_carriage(const RunConfig& cfg, const ConditionalPdfBank& bank) {
    if (!cfg.carriage.empty()) return parse_carriage_pair(cfg.carriage);
    const auto pairs = bank.carriage_pairs();
    if (pairs.empty()) throw CoverageError("PDF bank is empty");
    return pairs.front();
}

CarriagePrior build_prior(const RunConfig& cfg, const ConditionalPdfBank& bank) {
    const auto pairs = bank.carriage_pairs();
    if (cfg.prior == "uniform") return CarriagePrior::uniform(pairs);
    if (cfg.prior == "factored") return CarriagePrior::factored(pairs, cfg.p_hand, cfg.p_standing);
    if (cfg.prior == "single") return CarriagePrior::single(chosen_carriage(cfg, bank));
    std::ifstream in(cfg.prior);
    if (!in) throw ConfigError("unknown prior '" + cfg.prior + "' (not a file either)");
    try {
        return CarriagePrior::from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("bad prior file: " + std::string(e.what()));
    }
}

std::string prior_tag(const RunConfig& cfg, const ConditionalPdfBank& bank) {
    if (cfg.prior == "uniform" || cfg.prior == "factored") return cfg.prior;
    if (cfg.prior == "single") return slug(to_string(chosen_carriage(cfg, bank)));
    return fs::path(cfg.prior).stem().string();
}

std::vector<StateTables> prior_tables(const RunConfig& cfg, const ConditionalPdfBank& bank,
                                      const std::vector<CarriagePair>& pairs) {
    const auto settings = cfg.evaluation();
    std::vector<StateModel> models;
    for (const auto& c : pairs) models.push_back({c, build_hypotheses(bank, cfg.density, c, cfg.hypotheses)});
    std::vector<StateTables> tables(models.size());
    // One task per state; seeds depend on the state index only.
    parallel_for(models.size(), cfg.threads, [&](std::size_t i) {
        TabulateOptions opt = settings.tabulate;
        opt.mc.threads = 1;
        opt.mc.seed = mix_seed(settings.tabulate.mc.seed, i);
        tables[i] = tabulate_states(std::span<const StateModel>(&models[i], 1), settings.looks, opt).front();
    });
    return tables;
}

int cmd_ingest(const RunConfig& cfg) {
    IngestReport report;
    const Dataset d = prepare_dataset(cfg, report);
    std::ostringstream csv, rep;
    write_dataset_csv(csv, d);
    report.write(rep);
    Output out(cfg, "ingest");
    const nlohmann::json summary = {{"rows_read", report.rows_read},
                                    {"rows_accepted", report.rows_accepted},
                                    {"rows_censored", report.rows_censored},
                                    {"row_errors", report.errors.size()},
                                    {"samples_written", d.size()}};
    out.write("dataset.csv", csv.str(), summary);
    out.write("ingest_report.txt", rep.str(), summary);
    if (!report.ok()) report.write(std::cerr);
    return kOk;
}

int cmd_estimate(const RunConfig& cfg) {
    const auto bank = load_bank(cfg);
    Output out(cfg, "estimate");
    out.write("bank.json", bank.to_json().dump(1) + "\n", {{"cells", bank.size()}});
    return kOk;
}

int cmd_optimize(const RunConfig& cfg) {
    const auto bank = load_bank(cfg);
    const auto prior = build_prior(cfg, bank);
    const auto tables = prior_tables(cfg, bank, prior.pairs());
    MinimaxResult r;
    try {
        r = minimax_select(tables, cfg.target_pd);
    } catch (const InfeasibleError& e) {
        std::cerr << "infeasible: " << e.what() << '\n';
        return kInfeasible;
    }
    const std::string stem = "minimax_n" + std::to_string(cfg.n) + "_pd" + num(cfg.target_pd) + "_" + prior_tag(cfg, bank);
    std::ostringstream csv;
    csv << std::setprecision(12) << "carriage,threshold,offset,p_d,p_fa\n";
    for (const auto& [c, op] : r.per_state)
        csv << to_string(c) << ',' << op.threshold << ',' << r.detector.offset_for(c) << ',' << op.p_d << ','
            << op.p_fa << '\n';
    const nlohmann::json summary = {{"detector", r.detector.to_json()},
                                    {"worst_pd", r.worst_pd},
                                    {"worst_pfa", r.worst_pfa}};
    Output out(cfg, "optimize");
    out.write(stem + ".csv", csv.str(), summary);
    out.write(stem + ".detector.json", r.detector.to_json().dump(2) + "\n", summary);
    return kOk;
}

int cmd_det(const RunConfig& cfg) {
    const auto bank = load_bank(cfg);
    const DetMode mode = parse_det_mode(cfg.mode);
    const bool single = mode == DetMode::MofN || mode == DetMode::OneOfN;
    const auto prior = single ? CarriagePrior::single(chosen_carriage(cfg, bank)) : build_prior(cfg, bank);
    const std::string tag = single ? slug(to_string(prior.pairs().front())) : prior_tag(cfg, bank);
    const auto tables = prior_tables(cfg, bank, prior.pairs());

    const DetCurve curve = det_curve(tables, prior, mode, cfg.cognitive_step);
    const std::string stem = "det_" + to_string(mode) + "_n" + std::to_string(cfg.n) + "_" + tag;
    std::ostringstream csv;
    write_det_csv(csv, curve);
    Output out(cfg, "det");
    out.write(stem + ".csv", csv.str(), {{"points", curve.points.size()}, {"pd_at_pfa_0.1", curve.pd_at(0.1)}});
    if (cfg.svg) {
        std::vector<std::pair<std::string, DetCurve>> curves{{to_string(mode), curve}};
        if (mode == DetMode::MofN) curves.emplace_back("one-of-n", det_curve(tables, prior, DetMode::OneOfN));
        out.write(stem + ".svg", det_svg(curves, "DET, " + tag + ", N = " + std::to_string(cfg.n)));
    }
    return kOk;
}

int cmd_fdr(const RunConfig& cfg) {
    const auto bank = load_bank(cfg);
    const DetMode mode = parse_det_mode(cfg.mode);
    const auto prior = build_prior(cfg, bank);
    const std::string tag = prior_tag(cfg, bank);
    const ContactModel model(bank, prior, cfg.evaluation());
    const FdrCurve curve = fdr_curve(mode, model, cfg.cognitive_step);
    const auto pd = curve.pd_at_fdr(cfg.fdr_target);
    if (!pd) std::cerr << "warning: FDR target " << cfg.fdr_target << " is not achievable\n";

    const std::string stem = "fdr_" + to_string(mode) + "_n" + std::to_string(cfg.n) + "_" + tag;
    std::ostringstream csv;
    write_fdr_csv(csv, curve);
    nlohmann::json summary = {{"points", curve.points.size()}, {"fdr_target", cfg.fdr_target}, {"tc_all", model.tc_all()}};
    summary["pd_at_fdr_target"] = pd ? nlohmann::json(*pd) : nlohmann::json(nullptr);
    Output out(cfg, "fdr");
    out.write(stem + ".csv", csv.str(), summary);
    if (cfg.svg) out.write(stem + ".svg", fdr_svg({{to_string(mode), curve}}, "FDR, " + tag + ", N = " + std::to_string(cfg.n)));
    return kOk;
}

int cmd_sweep(const RunConfig& cfg) {
    const auto bank = load_bank(cfg);
    const DetMode mode = parse_det_mode(cfg.mode);
    const auto prior = build_prior(cfg, bank);
    const auto rows = look_sweep(mode, cfg.look_configs, bank, prior, cfg.evaluation(), cfg.fdr_target);
    nlohmann::json summary = nlohmann::json::array();
    for (const auto& r : rows) {
        if (!r.p_d)
            std::cerr << "warning: FDR target " << cfg.fdr_target << " not achievable with " << to_string(r.config)
                      << " looks\n";
        summary.push_back({{"looks", to_string(r.config)}, {"p_d", r.p_d ? nlohmann::json(*r.p_d) : nlohmann::json(nullptr)}});
    }
    std::ostringstream csv;
    write_sweep_csv(csv, rows, cfg.fdr_target);
    Output out(cfg, "sweep");
    out.write("sweep_" + to_string(mode) + "_fdr" + num(cfg.fdr_target) + "_" + prior_tag(cfg, bank) + ".csv", csv.str(),
              summary);
    return kOk;
}

int cmd_simulate(const RunConfig& cfg) {
    const auto bank = load_bank(cfg);
    const CarriagePair c = chosen_carriage(cfg, bank);
    const LookModel looks = cfg.looks();
    const CellSampler sampler(bank.at(c, cfg.distance_ft));
    std::vector<std::vector<int>> windows(cfg.windows);
    parallel_for(cfg.windows, cfg.threads,
                 [&](std::size_t w) { windows[w] = simulate_window(looks, sampler, mix_seed(cfg.seed, w)); });

    std::ostringstream csv;
    csv << "window,index,rssi\n";
    std::size_t heard = 0;
    for (std::size_t w = 0; w < windows.size(); ++w) {
        heard += windows[w].size();
        for (std::size_t i = 0; i < windows[w].size(); ++i) csv << w << ',' << i << ',' << windows[w][i] << '\n';
    }
    const std::string name = "simulate_" + slug(to_string(c)) + "_" + num(cfg.distance_ft) + "ft_n" +
                             std::to_string(cfg.n) + ".csv";
    Output out(cfg, "simulate");
    out.write(name, csv.str(), {{"windows", cfg.windows}, {"values", heard}, {"looks_per_window", looks.looks()}});
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Too-close-for-too-long detector workbench"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolkitVersion);

    struct Entry {
        const char* name;
        const char* help;
        int (*run)(const RunConfig&);
    };
    const Entry entries[] = {
        {"ingest", "validate, normalize and augment measurement CSVs", cmd_ingest},
        {"estimate", "estimate the conditional PDF bank", cmd_estimate},
        {"optimize", "minimax per-carriage thresholds for a target P_D", cmd_optimize},
        {"det", "DET curve of a detector family", cmd_det},
        {"fdr", "P_D versus false discovery rate", cmd_fdr},
        {"sweep", "P_D at a target FDR for several look configurations", cmd_sweep},
        {"simulate", "simulate recorded RSSI windows", cmd_simulate},
    };
    std::vector<std::unique_ptr<Command>> commands;
    for (const auto& e : entries) {
        auto cmd = std::make_unique<Command>();
        cmd->app = app.add_subcommand(e.name, e.help);
        add_common(*cmd);
        commands.push_back(std::move(cmd));
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }

    try {
        for (std::size_t i = 0; i < commands.size(); ++i)
            if (commands[i]->app->parsed()) return entries[i].run(resolve(*commands[i]));
    } catch (const InfeasibleError& e) {
        std::cerr << "infeasible: " << e.what() << '\n';
        return kInfeasible;
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << '\n';
        return kValidation;
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kConfig;
    }
    return kConfig;
}
