// Resolved settings of one CLI run. Loaded from JSON, then overridden by
// command-line flags; written verbatim into every output sidecar.
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "tcftl/evaluation.hpp"
#include "tcftl/measurements.hpp"

namespace tcftl {

inline constexpr const char* kToolkitVersion = "0.1.0";

struct RunConfig {
    // inputs
    std::vector<std::string> datasets;
    std::string schema;  // JSON file with a CsvSchema; empty for defaults
    std::string bank;    // serialized PDF bank; used instead of datasets
    std::string deltas;  // bulk-delta JSON, "estimate", or empty for no pose synthesis
    std::vector<double> extend_to;
    double extend_base_ft = 15.0;
    double path_loss_exponent = kDefaultPathLossExponent;
    int reference_tx = kReferenceTxDbm;
    bool censor = true;
    bool strict = false;
    double pdf_epsilon = 0.0;

    // hypotheses and prior
    HypothesisOptions hypotheses;
    ContactDensity density = ContactDensity::uniform_area();
    std::string prior = "uniform";  // uniform | factored | single | path to JSON weights
    double p_hand = 0.3;
    double p_standing = 0.4;
    std::string carriage;  // state for single-state modes; empty: first in the bank

    // look model
    ScanModel scan;
    SamplingModel sampling{RecordingPolicy::FirstChirp, 1, Correlation::Independent};
    std::string mode = "m-of-n";
    int n = 6;
    std::vector<LookConfig> look_configs{{6, 1}, {6, 4}};

    // evaluation
    double fdr_target = 0.5;
    double target_pd = 0.6;
    std::uint64_t seed = 20200601;
    std::size_t trials = 100000;
    std::string pd_method = "auto";
    double cognitive_step = 0.0025;

    // simulate
    double distance_ft = 3.0;
    std::size_t windows = 1000;

    // output
    std::string output_dir = ".";
    bool svg = true;
    unsigned threads = 1;  // never affects results, so not serialized

    /// Look model with n recorded values per window.
    LookModel looks() const;
    LookModel looks(int scans, int per_scan) const;
    EvaluationSettings evaluation() const;
    void validate() const;

    nlohmann::json to_json() const;
    /// Missing keys keep their defaults. Throws ConfigError on bad values.
    static RunConfig from_json(const nlohmann::json& j);
    static RunConfig load(const std::filesystem::path& path);
};

/// Ingests every dataset, normalizes tx power, then applies pose synthesis
/// and range extension when configured. Row issues land in report.
Dataset prepare_dataset(const RunConfig& cfg, IngestReport& report);
/// The configured bank file, or a bank estimated from prepare_dataset.
ConditionalPdfBank load_bank(const RunConfig& cfg, IngestReport& report);

/// "6x4" -> {6, 4}; "6" -> {6, 1}.
LookConfig parse_look_config(const std::string& text);
std::string to_string(const LookConfig& c);

}  // namespace tcftl
