#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fibredist/dataset.hpp"
#include "fibredist/distribution.hpp"
#include "fibredist/interpret.hpp"
#include "fibredist/model.hpp"
#include "fibredist/recommend.hpp"
#include "fibredist/validation.hpp"

namespace fibredist {

inline constexpr std::string_view kVersion = "1.0.0";

struct RunRequest {
    std::string polymer;
    ProcessInputs inputs;  // collector_type rides along here
    ModelKind model = ModelKind::linear;
    std::uint64_t seed = kDefaultSeed;
    bool include_collector = false;
    int bootstrap_draws = 100;
    int shap_sims = 50;

    // Throws invalid_argument naming the first bad field.
    void validate() const;
};

struct CoefficientRow {
    std::string term;
    double estimate = 0;
    std::optional<double> std_error;
    std::optional<double> t_value;
};

struct RunArtifacts {
    RunRequest request;
    std::string run_id;
    std::string dataset_fingerprint;
    std::string created_at;  // manifest only

    // modelling table summary
    std::vector<std::string> feature_names;
    std::vector<std::string> study_labels;
    std::vector<int> study_of_row;
    Vector observed;

    CVResult cv;
    std::string selected_params;
    double prediction = 0;
    PredictiveDistribution distribution;
    std::vector<CoefficientRow> coefficients;  // empty when the learner has none
    std::string coefficient_note;
    ImportanceTable importance;
    ShapSummary shap;
    IndexList shap_rows;  // table rows explained
    Matrix shap_feature_values;  // raw values of the explained features, aligned with shap.phi
    CorrelationMatrix correlations;
    SolventRecommendation recommendation;
    RangeSummary range;
    std::vector<RangeViolation> violations;
    std::vector<std::string> warnings;
};

}  // namespace fibredist

namespace fibredist {

// Canonical JSON for a request; the run id hashes this text.
std::string request_json(const RunRequest& request);

// Accepts the canonical form. Missing seed defaults to 42; a missing numeric
// input is an invalid_argument error naming the field.
RunRequest parse_run_request(std::string_view json_text);

}  // namespace fibredist
