// Operating characteristics of M-of-N detectors: DET curves, range-resolved
// detection probability, expected true/false contact counts, and the false
// discovery rate traded against overall detection probability.
#pragma once

#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "tcftl/densities.hpp"
#include "tcftl/detectors.hpp"
#include "tcftl/scansim.hpp"

namespace tcftl {

struct DetPoint {
    double p_fa = 0.0;
    double p_d = 0.0;
    MofNDetector detector;
};

struct DetCurve {
    std::vector<DetPoint> points;  // ascending p_fa

    /// Linear interpolation along the curve; clamps outside its range.
    double pd_at(double p_fa) const;
};

enum class DetMode { MofN, OneOfN, Agnostic, Cognitive };

std::string to_string(DetMode m);
DetMode parse_det_mode(const std::string& text);

class CarriagePrior {
  public:
    CarriagePrior() = default;
    /// Throws ConfigError unless weights are >= 0 and sum to 1 within 1e-9.
    explicit CarriagePrior(std::map<CarriagePair, double> weights);

    static CarriagePrior uniform(std::span<const CarriagePair> pairs);
    static CarriagePrior single(const CarriagePair& c) { return CarriagePrior({{c, 1.0}}); }
    /// Each user independently holds the phone in hand with p_hand and stands
    /// with p_standing; pair weights are the products renormalized over pairs.
    static CarriagePrior factored(std::span<const CarriagePair> pairs, double p_hand, double p_standing);

    const std::map<CarriagePair, double>& weights() const noexcept { return weights_; }
    double weight(const CarriagePair& c) const;
    std::vector<CarriagePair> pairs() const;

    nlohmann::json to_json() const;
    static CarriagePrior from_json(const nlohmann::json& j);

  private:
    std::map<CarriagePair, double> weights_;
};

/// Keeps the upper-left staircase: each kept point has strictly higher P_D
/// than every point with lower or equal P_FA. Ties prefer smaller m, then
/// larger tau.
std::vector<DetPoint> pareto_envelope(std::vector<DetPoint> candidates);

/// Candidate detectors of a sweep before envelope pruning. Cognitive
/// candidates come from align_thresholds on a grid of target P_D values.
std::vector<MofNDetector> sweep_detectors(std::span<const StateTables> states, DetMode mode,
                                          double cognitive_step = 0.0025);

/// Prior-weighted (P_FA, P_D) of one detector.
DetPoint operating_point(const MofNDetector& det, std::span<const StateTables> states, const CarriagePrior& prior);

/// MofN and OneOfN take exactly one state; Agnostic and Cognitive average
/// over the prior. Throws ParameterError for n < 1 or a bad state count.
DetCurve det_curve(std::span<const StateTables> states, const CarriagePrior& prior, DetMode mode,
                   double cognitive_step = 0.0025);
DetCurve det_curve(const HypothesisPdfs& h, const LookModel& looks, DetMode mode, const TabulateOptions& options = {});

struct PdEstimate {
    double value = 0.0;
    double std_error = 0.0;  // zero for closed-form evaluation
};

PdEstimate pd_at_range(const MofNDetector& det, const ConditionalPdfBank& bank, double distance_ft,
                       const CarriagePair& c, const LookModel& looks, const TabulateOptions& options = {});

/// Trapezoidal integral of D(s) P_D(s) over the interval; D is unscaled.
double expected_contacts(const MofNDetector& det, const ConditionalPdfBank& bank, const ContactDensity& density,
                         const CarriagePair& c, const Interval& interval, const LookModel& looks,
                         const TabulateOptions& options = {}, double max_gap_ft = kDefaultMaxGridGapFt);

/// Same integral for an arbitrary P_D(s) on the bank grid.
double integrate_contacts(const std::vector<double>& grid, const ContactDensity& density, const Interval& interval,
                          const std::function<double(double)>& pd_at_grid, double max_gap_ft = kDefaultMaxGridGapFt);

/// fc / (tc + fc). Throws ParameterError for negative inputs or no declarations.
double fdr(double tc, double fc);

struct FdrPoint {
    double p_d = 0.0;
    double fdr = 0.0;
    double tc = 0.0;
    double fc = 0.0;
    MofNDetector detector;
};

struct FdrCurve {
    std::vector<FdrPoint> points;  // ascending p_d

    /// Largest P_D whose interpolated FDR does not exceed target.
    std::optional<double> pd_at_fdr(double target) const;
};

struct EvaluationSettings {
    LookModel looks = LookModel::independent(6);
    TabulateOptions tabulate;
    HypothesisOptions hypotheses;
    ContactDensity density = ContactDensity::uniform_area();
    double cognitive_step = 0.0025;
    unsigned threads = 1;

    nlohmann::json to_json() const;
};

/// Range-resolved tables for every prior state: the building block of
/// expected-contact and FDR computations.
class ContactModel {
  public:
    ContactModel(const ConditionalPdfBank& bank, const CarriagePrior& prior, const EvaluationSettings& settings);

    /// Prior-weighted expected true and false contacts of a detector.
    FdrPoint evaluate(const MofNDetector& det) const;
    /// Prior-weighted TC with P_D = 1.
    double tc_all() const noexcept { return tc_all_; }
    const std::vector<StateTables>& hypothesis_tables() const noexcept { return hyp_tables_; }
    const CarriagePrior& prior() const noexcept { return prior_; }

  private:
    struct Node {
        double weight;
        const ExceedanceTable* table;
    };
    struct StateNodes {
        CarriagePair carriage;
        double prior;
        std::vector<Node> near;
        std::vector<Node> far;
    };

    CarriagePrior prior_;
    std::vector<StateTables> hyp_tables_;
    std::vector<std::vector<std::pair<double, ExceedanceTable>>> cell_tables_;
    std::vector<StateNodes> states_;
    double tc_all_ = 0.0;
};

/// Operating points of the mode's sweep scored by prior-weighted TC and FC,
/// pruned to those not beaten on both P_D and FDR, sorted by P_D.
FdrCurve fdr_curve(DetMode mode, const ConditionalPdfBank& bank, const CarriagePrior& prior,
                   const EvaluationSettings& settings);
FdrCurve fdr_curve(DetMode mode, const ContactModel& model, double cognitive_step = 0.0025);

struct LookConfig {
    int scans = 6;
    int samples_per_scan = 1;
};

struct LookSweepRow {
    LookConfig config;
    int looks = 0;
    std::optional<double> p_d;  // nullopt: FDR target not achievable
};

/// For each configuration, the P_D reachable at fdr_target. Correlation and
/// censoring come from settings.looks; more than one sample per scan records
/// all chirps.
std::vector<LookSweepRow> look_sweep(DetMode mode, std::span<const LookConfig> configs, const ConditionalPdfBank& bank,
                                     const CarriagePrior& prior, const EvaluationSettings& settings,
                                     double fdr_target);

void write_det_csv(std::ostream& os, const DetCurve& curve);
void write_fdr_csv(std::ostream& os, const FdrCurve& curve);
void write_sweep_csv(std::ostream& os, std::span<const LookSweepRow> rows, double fdr_target);
nlohmann::json to_json(const DetCurve& curve);
nlohmann::json to_json(const FdrCurve& curve);

}  // namespace tcftl
