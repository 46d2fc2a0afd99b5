#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fibredist/common.hpp"
#include "fibredist/dataset.hpp"
#include "fibredist/model.hpp"
#include "fibredist/parallel.hpp"

namespace fibredist {

struct ImportanceRow {
    std::string feature;
    double raw = 0;
    double scaled = 0;  // 0..100
};

struct ImportanceTable {
    std::string method;               // "abs_t", "abs_coefficient", "sse_reduction", "permutation"
    std::vector<ImportanceRow> rows;  // descending by raw score, ties by feature order

    std::vector<ImportanceRow> top(std::size_t n = 20) const;
};

// Min-max scaling to [0, 100]. When every score is equal, positive scores map
// to 100 and zeros stay 0.
std::vector<double> scale_importance(const std::vector<double>& raw);

struct ImportanceOptions {
    std::uint64_t seed = kDefaultSeed;
    int permutations = 10;
    Backend backend = kDefaultBackend;
};

// LINEAR: |t|. ELASTIC_NET: |coefficient|. TREE, FOREST: total SSE reduction.
// SVR, KNN, MARS: mean RMSE increase over seeded column permutations of table.
// Features dropped by the recipe are listed with score 0.
ImportanceTable variable_importance(const TrainedModel& model, const PolymerTable& table,
                                    const ImportanceOptions& options = {});

// Permutation importance alone, usable for any kind; x in the recipe's raw layout.
std::vector<double> permutation_importance(const TrainedModel& model, const Matrix& x, const Vector& y,
                                           const ImportanceOptions& options = {});

struct ShapOptions {
    int sims = 50;
    std::size_t max_background = 200;
    std::size_t max_instances = 200;
    std::uint64_t seed = kDefaultSeed;
    Backend backend = kDefaultBackend;
};

struct ShapSummary {
    std::vector<std::string> features;  // model's kept features
    Matrix phi;                         // instances x features, nm
    Matrix standard_error;              // Monte-Carlo SE of each phi
    Vector prediction;                  // f(x) per instance
    double baseline = 0;                // mean prediction over the background
    std::size_t background_rows = 0;
    int sims = 0;
    Vector mean_abs;                    // per feature
    std::vector<int> order;             // feature indices by mean |phi|, descending
};

// Monte-Carlo permutation Shapley values. For every (feature, simulation) one
// feature ordering and one background row are drawn and shared by all
// instances. instances and background are raw rows in the recipe layout.
ShapSummary shap_values(const TrainedModel& model, const Matrix& instances, const Matrix& background,
                        const ShapOptions& options = {});

// Seeded sample of at most max rows without replacement, ascending.
IndexList sample_rows(std::size_t n, std::size_t max, std::uint64_t seed, std::string_view purpose);

struct CorrelationMatrix {
    std::vector<std::string> names;  // features then "fibre_diameter"
    Matrix r;
    std::vector<std::string> excluded_zero_variance;
};

// Pearson correlations over the table's features and target.
CorrelationMatrix correlation_matrix(const PolymerTable& table);
double pearson(const Vector& a, const Vector& b);

struct ResponseSurface {
    std::string feature_a;
    std::string feature_b;
    Vector axis_a;     // raw units
    Vector axis_b;
    Matrix prediction; // axis_a.size() x axis_b.size(), nm
    ProcessInputs fixed;
};

// Predictions over a grid spanning the observed range of two features, the
// remaining inputs held at fixed.
ResponseSurface response_surface(const TrainedModel& model, const PolymerTable& table,
                                 const std::string& feature_a, const std::string& feature_b,
                                 const ProcessInputs& fixed, int size_a = 25, int size_b = 25,
                                 Backend backend = kDefaultBackend);

}  // namespace fibredist
