// Exposure-notification scan timing: how many RSSI values a receiver records
// per "too long" window, how they are reduced per scan, and how correlated the
// values inside one scan are. Also provides the per-cell exceedance tables
// P(count of recorded values >= tau is at least m) used by the detectors.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "tcftl/densities.hpp"

namespace tcftl {

struct ScanModel {
    double chirp_rate_hz = 4.0;
    double scan_interval_s = 300.0;
    double scan_duration_s = 4.0;
    int scans_per_window = 6;
    double window_s = 900.0;

    /// Decodable chirps from one device during one scan.
    int chirps_per_scan() const;
    void validate() const;

    nlohmann::json to_json() const;
    static ScanModel from_json(const nlohmann::json& j);
};

enum class RecordingPolicy { FirstChirp, AllChirps, MinAttenuation };
enum class Correlation { Independent, WithinScanCorrelated };

std::string to_string(RecordingPolicy p);
std::string to_string(Correlation c);
RecordingPolicy parse_recording_policy(const std::string& text);
Correlation parse_correlation(const std::string& text);

struct SamplingModel {
    RecordingPolicy policy = RecordingPolicy::FirstChirp;
    int samples_per_scan = 4;  // only used by AllChirps
    Correlation correlation = Correlation::WithinScanCorrelated;

    /// 1 for FirstChirp / MinAttenuation, samples_per_scan for AllChirps.
    int recorded_per_scan() const noexcept;
    void validate(const ScanModel& scan) const;

    nlohmann::json to_json() const;
    static SamplingModel from_json(const nlohmann::json& j);
};

/// Everything that determines the recorded values of one window.
struct LookModel {
    ScanModel scan;
    SamplingModel sampling;
    bool censor = true;
    int sensitivity_floor = kSensitivityFloorDbm;

    /// N: recorded values per window before censoring.
    int looks() const noexcept { return scan.scans_per_window * sampling.recorded_per_scan(); }
    void validate() const;

    /// n independent single-value scans.
    static LookModel independent(int n);
    /// `scans` scans with `per_scan` stratum-correlated values each.
    static LookModel correlated(int scans, int per_scan);

    nlohmann::json to_json() const;
    static LookModel from_json(const nlohmann::json& j);
};

/// splitmix64 finalizer; used to derive independent per-window seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

/// 64-bit generator with a portable uniform double.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}
    std::uint64_t next();
    /// Uniform on [0, 1).
    double uniform();

  private:
    std::uint64_t state_;
};

/// Inverse-CDF sampler over a stratified cell.
class CellSampler {
  public:
    explicit CellSampler(const StratifiedPdf& cell);
    std::size_t draw_stratum(Rng& rng) const;
    int draw(std::size_t stratum, Rng& rng) const;
    int draw_pooled(Rng& rng) const;
    std::size_t strata() const noexcept { return cdfs_.size(); }

  private:
    std::vector<double> stratum_cdf_;
    std::vector<int> support_min_;
    std::vector<std::vector<double>> cdfs_;
    int pooled_min_ = 0;
    std::vector<double> pooled_cdf_;
};

/// One window of recorded values (after policy reduction and censoring).
std::vector<int> simulate_window(const LookModel& model, const CellSampler& sampler, std::uint64_t seed);
std::vector<int> simulate_window(const LookModel& model, const StratifiedPdf& cell, std::uint64_t seed);
std::vector<int> simulate_window(const LookModel& model, const ConditionalPdfBank& bank, double distance_ft,
                                 const CarriagePair& c, std::uint64_t seed);

/// Removes values below floor (packets that were not decoded).
std::vector<int> censor_sensitivity(const std::vector<int>& values, int floor = kSensitivityFloorDbm);

/// P(at least m recorded values >= tau), tabulated for every integer tau in
/// [tau_lo, tau_hi] and m in [1, looks]. tau below the table behaves like
/// tau_lo, above like "never".
class ExceedanceTable {
  public:
    ExceedanceTable() = default;
    ExceedanceTable(int tau_lo, int tau_hi, int looks, std::vector<double> pd, std::vector<double> std_error = {});

    int tau_lo() const noexcept { return tau_lo_; }
    int tau_hi() const noexcept { return tau_hi_; }
    int looks() const noexcept { return looks_; }
    bool monte_carlo() const noexcept { return !std_error_.empty(); }

    double pd(int tau, int m) const noexcept;
    /// Zero for exact tables.
    double std_error(int tau, int m) const noexcept;

  private:
    std::size_t index(int tau, int m) const noexcept;
    int tau_lo_ = 0;
    int tau_hi_ = -1;
    int looks_ = 0;
    std::vector<double> pd_;
    std::vector<double> std_error_;
};

enum class PdMethod {
    Auto,        // exact for independent looks, Monte Carlo for correlated
    Exact,       // stratum-mixture convolution
    MonteCarlo,  // simulate_window
};

std::string to_string(PdMethod m);
PdMethod parse_pd_method(const std::string& text);

struct MonteCarloOptions {
    std::size_t trials = 100000;
    std::uint64_t seed = 20200601;
    unsigned threads = 1;
};

ExceedanceTable exceedance_exact(const StratifiedPdf& cell, const LookModel& model);
ExceedanceTable exceedance_monte_carlo(const StratifiedPdf& cell, const LookModel& model,
                                       const MonteCarloOptions& mc = {});
ExceedanceTable exceedance(const StratifiedPdf& cell, const LookModel& model, PdMethod method,
                           const MonteCarloOptions& mc = {});

}  // namespace tcftl
