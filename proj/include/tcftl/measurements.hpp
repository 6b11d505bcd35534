// RSSI measurement records and the dataset transformations applied before
// any density estimation: ingest, tx-power normalization, synthetic pose
// expansion for the stationary user, and range extension by path-loss shift.
#pragma once

#include <compare>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

namespace tcftl {

inline constexpr int kSensitivityFloorDbm = -100;
inline constexpr int kReferenceTxDbm = 12;
inline constexpr int kPoseStepDeg = 45;
inline constexpr int kPoseCount = 8;

enum class Posture { Standing, Sitting };
enum class Holding { Hand, FrontPantsPocket, BackPantsPocket, ShirtPocket, Bag };
enum class Channel { Low, Mid, High, Unknown };

struct CarriageState {
    Posture posture = Posture::Standing;
    Holding holding = Holding::Hand;

    auto operator<=>(const CarriageState&) const = default;
};

/// Carriage of (user 1, user 2). Detectors and PDFs are indexed by the pair.
struct CarriagePair {
    CarriageState user1;
    CarriageState user2;

    auto operator<=>(const CarriagePair&) const = default;
};

// Text forms: state "standing:hand", pair "standing:hand/sitting:shirt_pocket".
std::string to_string(Posture p);
std::string to_string(Holding h);
std::string to_string(Channel c);
std::string to_string(const CarriageState& s);
std::string to_string(const CarriagePair& c);
Posture parse_posture(std::string_view text);
Holding parse_holding(std::string_view text);
Channel parse_channel(std::string_view text);
CarriageState parse_carriage_state(std::string_view text);
CarriagePair parse_carriage_pair(std::string_view text);

/// The six pairings for which measurements exist in the public data set.
std::vector<CarriagePair> measured_carriage_pairs();

struct RssiSample {
    int rssi = 0;      // dBm, 1 dB quantized
    int tx_power = 0;  // dBm
    double distance_ft = 0.0;
    int pose_user1 = 0;  // degrees, multiple of 45
    int pose_user2 = 0;
    CarriagePair carriage;
    Channel channel = Channel::Unknown;
    bool synthetic = false;
};

/// Round half away from zero to integer dB.
int quantize_db(double value);

bool is_valid_pose(int degrees);

/// Ordered, immutable collection of samples.
class Dataset {
  public:
    Dataset() = default;
    explicit Dataset(std::vector<RssiSample> samples, std::string provenance = {})
        : samples_(std::move(samples)), provenance_(std::move(provenance)) {}

    const std::vector<RssiSample>& samples() const noexcept { return samples_; }
    const std::string& provenance() const noexcept { return provenance_; }
    std::size_t size() const noexcept { return samples_.size(); }
    bool empty() const noexcept { return samples_.empty(); }

    /// Distinct distances (ascending) present for a carriage pair.
    std::vector<double> distances(const CarriagePair& c) const;
    /// Distinct carriage pairs in first-appearance order.
    std::vector<CarriagePair> carriage_pairs() const;

  private:
    std::vector<RssiSample> samples_;
    std::string provenance_;
};

/// Logical field -> CSV header name. Optional fields may be left empty.
struct CsvSchema {
    std::string rssi = "rssi";
    std::string tx_power = "tx_power";
    std::string distance = "distance_ft";
    std::string carriage_user1 = "carriage_user1";
    std::string carriage_user2 = "carriage_user2";
    std::string pose_user1 = "pose_user1";
    std::string pose_user2 = "pose_user2";
    std::string channel = "channel";      // optional
    std::string synthetic = "synthetic";  // optional

    static CsvSchema from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

struct IngestOptions {
    bool strict = false;  // any row error aborts the ingest
    bool censor = true;   // drop rows below the sensitivity floor
    int sensitivity_floor = kSensitivityFloorDbm;
};

struct RowIssue {
    std::size_t line = 0;
    std::string message;
};

struct IngestReport {
    std::size_t rows_read = 0;
    std::size_t rows_accepted = 0;
    std::size_t rows_censored = 0;
    std::vector<RowIssue> errors;

    bool ok() const noexcept { return errors.empty(); }
    /// One line per issue plus a summary line.
    void write(std::ostream& os) const;
};

struct IngestResult {
    Dataset dataset;
    IngestReport report;
};

/// Parse CSV text. Throws SchemaError for a missing column and, in strict
/// mode, RowError for the first invalid row.
IngestResult ingest_csv_text(std::string_view text, const CsvSchema& schema,
                             const IngestOptions& options = {}, std::string provenance = {});
IngestResult ingest_csv(const std::filesystem::path& path, const CsvSchema& schema,
                        const IngestOptions& options = {});

/// Write with the default schema's headers; ingest_csv reads it back.
void write_dataset_csv(std::ostream& os, const Dataset& d);

/// rssi += reference_tx - tx_power; tx_power := reference_tx.
Dataset normalize_tx(const Dataset& d, int reference_tx = kReferenceTxDbm);

/// (carriage state, pose angle) -> attenuation delta in dB, relative to 0 deg.
class BulkDeltas {
  public:
    void set(const CarriageState& c, int pose_deg, double delta_db);
    std::optional<double> get(const CarriageState& c, int pose_deg) const;
    bool covers(const CarriageState& c) const;
    const std::map<std::pair<CarriageState, int>, double>& table() const noexcept {
        return table_;
    }

    static BulkDeltas from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;

  private:
    std::map<std::pair<CarriageState, int>, double> table_;
};

struct AugmentOptions {
    bool censor = true;
    int sensitivity_floor = kSensitivityFloorDbm;
};

/// Each measured sample gains seven synthetic companions with user-2 pose
/// rotated through the other angles. Throws ConfigError if a needed delta is
/// missing.
Dataset synthesize_pose(const Dataset& d, const BulkDeltas& deltas, const AugmentOptions& options = {});

/// Per-angle mean rssi difference from 0 deg for user-1 rotation, pooled over
/// ranges. Throws EstimationError listing absent angles.
std::map<int, double> estimate_bulk_deltas(const Dataset& d, const CarriageState& carriage);

/// All carriage states seen on user 1 with full angular coverage.
BulkDeltas estimate_all_bulk_deltas(const Dataset& d);

inline constexpr double kDefaultPathLossExponent = 2.0;
inline constexpr double kMaxBleRangeFt = 30.0;

/// Appends copies of the base-range samples moved to target_ft with the
/// log-distance excess loss subtracted. target == base returns d unchanged.
Dataset extend_range(const Dataset& d, double base_ft, double target_ft,
                     double path_loss_exponent = kDefaultPathLossExponent,
                     double max_range_ft = kMaxBleRangeFt, const AugmentOptions& options = {});

/// 10 * n * log10(target / base), in dB (positive means more loss).
double excess_path_loss_db(double base_ft, double target_ft, double path_loss_exponent);

bool same_distance(double a, double b);

}  // namespace tcftl
