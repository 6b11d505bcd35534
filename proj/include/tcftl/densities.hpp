// Empirical RSSI distributions on the 1 dB grid, conditioned on range and
// carriage, and the contact-density weighted H1/H0 mixtures built from them.
#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "tcftl/measurements.hpp"

namespace tcftl {

/// Probability mass over consecutive 1 dB bins starting at support_min.
class EmpiricalPdf {
  public:
    EmpiricalPdf() = default;
    /// Takes non-negative weights and normalizes them to unit mass.
    EmpiricalPdf(int support_min, std::vector<double> weights, std::size_t sample_count = 0);

    static EmpiricalPdf point_mass(int x, std::size_t sample_count = 1);

    int support_min() const noexcept { return support_min_; }
    int support_max() const noexcept { return support_min_ + static_cast<int>(probs_.size()) - 1; }
    std::size_t bins() const noexcept { return probs_.size(); }
    bool empty() const noexcept { return probs_.empty(); }
    const std::vector<double>& probabilities() const noexcept { return probs_; }
    std::size_t sample_count() const noexcept { return sample_count_; }

    /// Mass at x; zero off the support.
    double operator()(int x) const noexcept;
    /// P(X >= tau).
    double tail(int tau) const noexcept;
    double mean() const noexcept;
    /// Smallest x with P(X <= x) >= 0.5.
    int median() const noexcept;
    double total() const noexcept;

    EmpiricalPdf shifted(int delta_db) const;
    /// Same distribution on a support extended (never shrunk) to [lo, hi].
    EmpiricalPdf widened(int lo, int hi) const;
    /// Adds epsilon to every bin and renormalizes.
    EmpiricalPdf with_floor(double epsilon) const;

    nlohmann::json to_json() const;
    static EmpiricalPdf from_json(const nlohmann::json& j);

  private:
    int support_min_ = 0;
    std::vector<double> probs_;
    std::size_t sample_count_ = 0;
};

/// Weighted sum of pdfs on their union support, renormalized.
EmpiricalPdf weighted_sum(const std::vector<std::pair<double, const EmpiricalPdf*>>& terms);

/// One pose / fading condition inside a cell.
struct Stratum {
    std::string label;
    double weight = 1.0;
    EmpiricalPdf pdf;
};

/// A cell distribution split into strata. Within-scan draws share a stratum.
class StratifiedPdf {
  public:
    StratifiedPdf() = default;
    explicit StratifiedPdf(std::vector<Stratum> strata);
    static StratifiedPdf single(EmpiricalPdf pdf, std::string label = "all");

    const std::vector<Stratum>& strata() const noexcept { return strata_; }
    const EmpiricalPdf& pooled() const noexcept { return pooled_; }
    bool empty() const noexcept { return strata_.empty(); }

    StratifiedPdf shifted(int delta_db) const;

    nlohmann::json to_json() const;
    static StratifiedPdf from_json(const nlohmann::json& j);

  private:
    std::vector<Stratum> strata_;
    EmpiricalPdf pooled_;
};

struct PdfOptions {
    int support_lo = kSensitivityFloorDbm;
    int support_hi = kReferenceTxDbm;
    double epsilon = 0.0;  // per-bin add-epsilon floor; 0 keeps raw frequencies
    bool include_synthetic = true;
};

EmpiricalPdf estimate_pdf(const Dataset& d, double distance_ft, const CarriagePair& c, const PdfOptions& options = {});

/// Same cell, split by (user-1 pose, user-2 pose) stratum.
StratifiedPdf estimate_stratified_pdf(const Dataset& d, double distance_ft, const CarriagePair& c,
                                      const PdfOptions& options = {});

/// p(x | s, c) on the measured distance grid of each carriage pair.
class ConditionalPdfBank {
  public:
    void insert(const CarriagePair& c, double distance_ft, StratifiedPdf cell);

    const StratifiedPdf* find(const CarriagePair& c, double distance_ft) const;
    /// Throws CoverageError naming the cell.
    const StratifiedPdf& at(const CarriagePair& c, double distance_ft) const;
    const EmpiricalPdf& pdf(const CarriagePair& c, double distance_ft) const { return at(c, distance_ft).pooled(); }

    std::vector<double> grid(const CarriagePair& c) const;
    std::vector<CarriagePair> carriage_pairs() const;
    std::size_t size() const noexcept;

    nlohmann::json to_json() const;
    static ConditionalPdfBank from_json(const nlohmann::json& j);

  private:
    std::map<CarriagePair, std::vector<std::pair<double, StratifiedPdf>>> cells_;
};

ConditionalPdfBank estimate_bank(const Dataset& d, const PdfOptions& options = {});

/// D(s) = s: contacts uniform over the plane around the index case.
double uniform_area_density(double s_ft);

class ContactDensity {
  public:
    enum class Kind { UniformArea, Custom };

    static ContactDensity uniform_area() { return ContactDensity{}; }
    /// Piecewise linear through (s, D) pairs; zero outside the table.
    static ContactDensity custom(std::vector<std::pair<double, double>> table);

    Kind kind() const noexcept { return kind_; }
    const std::vector<std::pair<double, double>>& table() const noexcept { return table_; }
    double operator()(double s_ft) const;

    nlohmann::json to_json() const;
    static ContactDensity from_json(const nlohmann::json& j);

  private:
    Kind kind_ = Kind::UniformArea;
    std::vector<std::pair<double, double>> table_;
};

inline constexpr double kTooCloseBoundaryFt = 6.0;
inline constexpr double kDefaultMaxGridGapFt = 5.0;

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    bool include_lo = true;  // false: a grid point sitting on lo belongs elsewhere
};

/// A trapezoidal node of the distance integral. The node's distribution is
/// the one measured at grid_ft (the end nodes reuse the nearest grid point).
struct QuadratureNode {
    double s_ft = 0.0;
    double grid_ft = 0.0;
    double weight = 0.0;  // D(s) times the trapezoid width
};

/// Throws CoverageError when the grid leaves a gap wider than max_gap_ft in
/// the interval or has no point inside it.
std::vector<QuadratureNode> quadrature_nodes(const std::vector<double>& grid, const ContactDensity& density,
                                             const Interval& interval, double max_gap_ft = kDefaultMaxGridGapFt);

EmpiricalPdf mixture_pdf(const ConditionalPdfBank& bank, const ContactDensity& density, const CarriagePair& c,
                         const Interval& interval, double max_gap_ft = kDefaultMaxGridGapFt);

/// Mixture keeping every cell stratum as its own stratum.
StratifiedPdf mixture_stratified(const ConditionalPdfBank& bank, const ContactDensity& density,
                                 const CarriagePair& c, const Interval& interval,
                                 double max_gap_ft = kDefaultMaxGridGapFt);

struct HypothesisPdfs {
    StratifiedPdf h1;  // too close
    StratifiedPdf h0;  // not too close
    double boundary_ft = kTooCloseBoundaryFt;
    double max_range_ft = kMaxBleRangeFt;

    static HypothesisPdfs from_pdfs(EmpiricalPdf h1, EmpiricalPdf h0, double boundary_ft = kTooCloseBoundaryFt,
                                    double max_range_ft = kMaxBleRangeFt);
};

struct HypothesisOptions {
    double boundary_ft = kTooCloseBoundaryFt;
    double max_range_ft = kMaxBleRangeFt;
    double max_gap_ft = kDefaultMaxGridGapFt;
};

/// H1 integrates [0, boundary] (boundary point included), H0 (boundary, max_range].
HypothesisPdfs build_hypotheses(const ConditionalPdfBank& bank, const ContactDensity& density,
                                const CarriagePair& c, const HypothesisOptions& options = {});

}  // namespace tcftl
