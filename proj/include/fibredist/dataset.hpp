#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fibredist/common.hpp"

namespace fibredist {

// The six process parameters used as predictors, in canonical column order.
inline constexpr std::array<std::string_view, 6> kProcessFeatures = {
    "concentration", "needle_diameter", "rotation_speed", "voltage", "flow_rate", "distance"};

inline constexpr std::string_view kNoSolvent = "NONE";

// One measured fibre from one study.
struct StudyRecord {
    std::string doi;
    std::string polymer;
    std::array<std::string, 3> solvents{std::string(kNoSolvent), std::string(kNoSolvent),
                                        std::string(kNoSolvent)};
    std::array<std::optional<double>, 3> solvent_ratios{};
    double concentration = 0;    // % w/w
    double needle_diameter = 0;  // gauge
    std::string collector_type = std::string(kNoSolvent);
    double rotation_speed = 0;   // rpm
    double voltage = 0;          // kV
    double flow_rate = 0;        // ml/h
    double distance = 0;         // cm
    std::optional<double> temperature;
    std::optional<double> humidity;
    double fibre_diameter = 0;   // nm

    std::array<double, 6> process() const {
        return {concentration, needle_diameter, rotation_speed, voltage, flow_rate, distance};
    }
};

struct ProcessInputs {
    double concentration = 0;
    double needle_diameter = 0;
    double rotation_speed = 0;
    double voltage = 0;
    double flow_rate = 0;
    double distance = 0;
    std::string collector_type;

    std::array<double, 6> values() const {
        return {concentration, needle_diameter, rotation_speed, voltage, flow_rate, distance};
    }
    static ProcessInputs from_values(const std::array<double, 6>& v, std::string collector = {});
    // Throws invalid_argument when a value is non-finite or negative.
    void validate() const;
};

struct IngestReport {
    std::size_t rows_read = 0;
    std::size_t rows_kept = 0;
    std::size_t dropped_missing = 0;
    std::size_t dropped_non_finite_target = 0;
    std::size_t dropped_non_positive_target = 0;
    std::size_t ratio_sum_warnings = 0;
    std::map<std::string, std::size_t> missing_by_column;
    char delimiter = ',';

    std::string to_json() const;
};

struct LoadedDataset {
    std::vector<StudyRecord> records;
    IngestReport report;
};

// Lenient numeric parsing for hand-curated spreadsheets: takes the first
// numeric token, strips units, and reconciles decimal comma vs decimal point.
// When both separators occur, the rightmost is the decimal mark; a lone comma
// is a decimal mark; a separator repeated with no other present is a
// thousands separator.
std::optional<double> parse_numeric(std::string_view text);

LoadedDataset load_dataset(std::istream& in);
LoadedDataset load_dataset(const std::filesystem::path& path);

void write_dataset_csv(std::ostream& out, const std::vector<StudyRecord>& records);

// Content hash (hex SHA-256) of the canonical CSV rendering of the records.
std::string dataset_fingerprint(const std::vector<StudyRecord>& records);

std::vector<std::string> list_polymers(const std::vector<StudyRecord>& records);

// Model-ready table for one polymer. Features are raw (untransformed); the
// normalisation recipe is fitted per resampling split by the caller.
struct PolymerTable {
    std::string polymer;
    Matrix features;                          // n x p, raw units
    Vector target;                            // fibre diameter, nm
    std::vector<int> study;                   // group id per row, 0..n_studies-1
    std::vector<std::string> study_labels;    // group id -> normalised doi
    std::vector<std::string> feature_names;
    std::vector<std::size_t> source_rows;     // index into the record list

    std::size_t rows() const { return static_cast<std::size_t>(target.size()); }
    std::size_t cols() const { return feature_names.size(); }
    std::size_t n_studies() const { return study_labels.size(); }
    PolymerTable take_rows(const std::vector<int>& rows) const;
};

std::string normalise_study_id(std::string_view doi);

// Rows of one polymer. With include_collector, one 0/1 indicator column per
// collector label is appended when more than one label is present.
PolymerTable polymer_subset(const std::vector<StudyRecord>& records, const std::string& polymer,
                            bool include_collector = false);

// Maps user inputs into a row in the table's feature layout.
Vector feature_row(const PolymerTable& table, const ProcessInputs& inputs);

// z-normalisation with zero-variance removal, fitted on training rows only.
struct NormalizationRecipe {
    std::vector<std::string> all_features;
    std::vector<std::string> kept_features;
    std::vector<std::string> dropped_zero_variance;
    std::vector<int> kept_columns;  // indices into all_features
    Vector mean;                    // per kept feature
    Vector sd;                      // per kept feature, n-1 denominator

    bool operator==(const NormalizationRecipe&) const = default;
};

NormalizationRecipe fit_recipe(const Matrix& train_rows, const std::vector<std::string>& names);

// rows must use the recipe's all_features layout.
Matrix apply_recipe(const NormalizationRecipe& recipe, const Matrix& rows);

// Named-column variant: every kept feature must be present in names.
Matrix apply_recipe(const NormalizationRecipe& recipe, const Matrix& rows,
                    const std::vector<std::string>& names);

struct FeatureRange {
    std::string feature;
    double min = 0;
    double max = 0;
};

struct RangeSummary {
    std::vector<FeatureRange> features;  // the six process parameters
    const FeatureRange* find(std::string_view name) const;
};

RangeSummary range_of(const PolymerTable& table);
RangeSummary range_of(const std::vector<StudyRecord>& records, const std::string& polymer);

struct RangeViolation {
    std::string feature;
    double value = 0;
    double min = 0;
    double max = 0;
};

// Closed-interval check; an empty result means everything is in range.
std::vector<RangeViolation> range_check(const ProcessInputs& inputs, const RangeSummary& range);

struct SyntheticConfig {
    std::string polymer = "SYN";
    int n_studies = 30;
    int rows_per_study = 20;
    // 0 means one process condition per row; otherwise rows_per_study is split
    // evenly across this many conditions (replicate fibres per condition).
    int conditions_per_study = 0;
    double noise_sd = 15.0;
    double study_offset_sd = 10.0;
    std::uint64_t seed = kDefaultSeed;
};

struct SyntheticDataset {
    std::vector<StudyRecord> records;
    std::vector<double> study_offsets;  // per study, nm
    std::vector<double> ground_truth;   // noiseless, offset-free diameter per record
};

// Noiseless diameter (nm) used by the generator:
//   380 + 220 / (1 + exp(-(c - 12) / 0.8))      concentration, dominant and monotone
//      + 8 (22 - g)                            needle gauge, thinner bore -> thinner fibre
//      + 200 tanh((V - 17) / 2.5) (Q - 1.1)    voltage x flow-rate interaction
//      + 120 ((d - 15) / 5)^2                  tip-to-collector distance
//      + 0.01 rpm
double synthetic_ground_truth(const std::array<double, 6>& process);

// Flow rates are clamped to [0.1, 2.0] ml/h, so the interaction stays within
// +-200 nm. Observed diameters are floored at 1 nm.
SyntheticDataset generate_synthetic(const SyntheticConfig& config);

}  // namespace fibredist
