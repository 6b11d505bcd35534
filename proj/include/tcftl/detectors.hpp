// Binary "too close for too long" detectors: the log-likelihood-ratio
// detector built from a tabulated nonlinearity, the M-of-N detector with
// optional per-carriage RSSI corrections, and minimax tuning of the latter.
#pragma once

#include <map>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"
#include "tcftl/densities.hpp"
#include "tcftl/scansim.hpp"

namespace tcftl {

inline constexpr double kDefaultH0Floor = 1e-4;

/// z(x) = ln max(p(x|H1), floor) - ln max(p(x|H0), floor) on 1 dB bins.
class Nonlinearity {
  public:
    Nonlinearity(int support_min, std::vector<double> weights, double h0_floor);

    int support_min() const noexcept { return support_min_; }
    int support_max() const noexcept { return support_min_ + static_cast<int>(weights_.size()) - 1; }
    const std::vector<double>& weights() const noexcept { return weights_; }
    double h0_floor() const noexcept { return h0_floor_; }

    /// Out-of-support values clamp to the nearest tabulated bin.
    double weight(int x) const noexcept;

    nlohmann::json to_json() const;

  private:
    int support_min_;
    std::vector<double> weights_;
    double h0_floor_;
};

Nonlinearity build_nonlinearity(const EmpiricalPdf& h1, const EmpiricalPdf& h0, double floor = kDefaultH0Floor);
Nonlinearity build_nonlinearity(const HypothesisPdfs& h, double floor = kDefaultH0Floor);

/// Sum of per-sample weights. Throws InputError on an empty sample set.
double llr_statistic(const Nonlinearity& nl, std::span<const int> samples);

enum class Verdict { TooCloseTooLong, NotTooClose };

struct Decision {
    Verdict verdict = Verdict::NotTooClose;
    double statistic = 0.0;
};

/// Declares TooCloseTooLong when the log-likelihood ratio reaches threshold.
Decision decide_llr(const Nonlinearity& nl, std::span<const int> samples, double threshold = 0.0);

struct Look {
    int rssi = 0;
    CarriagePair carriage;
};

struct MofNDetector {
    int tau = 0;  // dB, inclusive
    int m = 1;
    int n = 1;
    /// Added to each sample's RSSI according to its carriage pair.
    std::optional<std::map<CarriagePair, int>> offsets;
    std::optional<CarriagePair> reference;

    void validate() const;
    /// 0 without offsets; ConfigError when offsets lack the pair.
    int offset_for(const CarriagePair& c) const;

    nlohmann::json to_json() const;
    static MofNDetector from_json(const nlohmann::json& j);
};

/// statistic = count of corrected samples >= tau; detection when count >= m.
Decision decide_mofn(const MofNDetector& det, std::span<const Look> samples);
/// For detectors without offsets.
Decision decide_mofn(const MofNDetector& det, std::span<const int> samples);

/// sum_{k=m}^{n} C(n,k) p^k (1-p)^(n-k). Throws ParameterError on bad bounds.
double mofn_detection_prob(double p_exceed, int m, int n);

/// A carriage pair with its H1/H0 distributions.
struct StateModel {
    CarriagePair carriage;
    HypothesisPdfs hypotheses;
};

/// Exceedance tables of one carriage pair under both hypotheses.
struct StateTables {
    CarriagePair carriage;
    ExceedanceTable h1;
    ExceedanceTable h0;

    int looks() const noexcept { return h1.looks(); }
};

struct TabulateOptions {
    PdMethod method = PdMethod::Auto;
    MonteCarloOptions mc;
};

std::vector<StateTables> tabulate_states(std::span<const StateModel> states, const LookModel& looks,
                                         const TabulateOptions& options = {});

/// Lowest and one-past-highest threshold worth sweeping over all tables.
std::pair<int, int> threshold_range(std::span<const StateTables> states);

struct StateOperatingPoint {
    int threshold = 0;  // uncorrected dB threshold for this state
    double p_d = 0.0;
    double p_fa = 0.0;
};

struct MinimaxResult {
    MofNDetector detector;
    std::map<CarriagePair, StateOperatingPoint> per_state;
    double worst_pd = 0.0;
    double worst_pfa = 0.0;
};

/// For fixed m, each state's largest threshold reaching target_pd, folded into
/// offsets relative to the first state. nullopt if some state cannot reach it.
std::optional<MinimaxResult> align_thresholds(std::span<const StateTables> states, int m, double target_pd);

/// Every state reaches target_pd; m minimizes the worst-state P_FA, ties to
/// the smallest m. Throws InfeasibleError with the best reachable worst-state P_D.
MinimaxResult minimax_select(std::span<const StateTables> states, double target_pd);
MinimaxResult minimax_select(std::span<const StateModel> states, const LookModel& looks, double target_pd,
                             const TabulateOptions& options = {});

}  // namespace tcftl
