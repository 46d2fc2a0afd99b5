#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fibredist/common.hpp"
#include "fibredist/dataset.hpp"
#include "fibredist/model.hpp"
#include "fibredist/parallel.hpp"

namespace fibredist {

struct Split {
    IndexList train;  // ascending
    IndexList test;   // ascending
};

// Outer folds plus, for each outer fold, the inner tuning splits of its
// training rows. All indices refer to rows of the table the plan was built on.
struct FoldPlan {
    std::vector<Split> outer;
    std::vector<std::vector<Split>> inner;
    std::vector<std::string> outer_labels;  // held-out study, or "fold k" for shuffled plans
    std::vector<std::string> warnings;
    std::uint64_t seed = kDefaultSeed;
};

struct InnerScheme {
    int repeats = 2;
    int folds = 5;
};

// repeats x folds random partitions of rows; fewer than 10 rows falls back to
// leave-one-out and appends a warning.
std::vector<Split> make_inner_splits(const IndexList& rows, std::uint64_t seed, const InnerScheme& scheme,
                                     std::vector<std::string>* warnings = nullptr);

// One outer fold per distinct study (leave-one-study-out).
FoldPlan make_folds(const std::vector<int>& study_ids, std::uint64_t seed, const InnerScheme& scheme = {});

// Row-shuffled k-fold outer partition ignoring studies; used to show the
// optimism that grouping removes.
FoldPlan make_shuffled_folds(std::size_t n, int k, std::uint64_t seed, const InnerScheme& scheme = {});

struct Metrics {
    std::size_t n = 0;
    std::optional<double> r2;  // absent when the observed values are constant
    double rmse = 0;
    double mae = 0;
};

Metrics compute_metrics(const Vector& y, const Vector& yhat);

struct MetricStat {
    double mean = 0;
    double sd = 0;
    std::size_t count = 0;  // folds that contributed
};

struct MetricsSummary {
    MetricStat r2;
    MetricStat rmse;
    MetricStat mae;
    std::size_t folds = 0;
    std::size_t r2_missing = 0;  // folds whose observed values were constant
};

// Mean and n-1 standard deviation across folds.
MetricsSummary summarize(const std::vector<Metrics>& folds);

struct TuneResult {
    std::size_t best = 0;
    HyperParams params;                // resolved winner
    std::vector<HyperParams> grid;     // resolved grid
    std::vector<double> mean_rmse;     // per grid point; +inf when a fit failed
};

struct TuneOptions {
    std::uint64_t seed = kDefaultSeed;
    Backend backend = kDefaultBackend;
};

// Picks the grid point with the lowest mean inner RMSE (ties -> earliest).
// x holds raw rows; splits index into x. The recipe is refit on every inner
// training part. Data-dependent grid values are resolved once on all of x.
TuneResult tune(const Matrix& x, const Vector& y, const std::vector<std::string>& names,
                const std::vector<Split>& splits, const std::vector<HyperParams>& grid,
                const TuneOptions& options = {});

struct FoldResult {
    int fold = 0;
    std::string label;
    IndexList test_rows;
    HyperParams selected;
    Vector predictions;  // aligned with test_rows
    Metrics metrics;
};

struct CVResult {
    ModelKind kind = ModelKind::linear;
    std::vector<FoldResult> folds;
    Vector oof;                 // out-of-fold prediction per row
    std::vector<int> fold_of_row;
    MetricsSummary summary;
    Metrics pooled;             // metrics of the full out-of-fold vector
    std::vector<std::string> warnings;

    Vector residuals(const Vector& y) const { return y - oof; }
};

enum class OuterScheme { leave_one_study_out, shuffled };

struct CVOptions {
    std::uint64_t seed = kDefaultSeed;
    Backend backend = kDefaultBackend;
    OuterScheme scheme = OuterScheme::leave_one_study_out;
    int shuffled_folds = 5;
    InnerScheme inner;
    std::optional<std::vector<HyperParams>> grid;  // default_grid when absent
};

CVResult nested_cv(const PolymerTable& table, ModelKind kind, const CVOptions& options = {});
CVResult nested_cv(const PolymerTable& table, const FoldPlan& plan, ModelKind kind, const CVOptions& options);

struct FinalFit {
    TrainedModel model;
    TuneResult tuning;
};

// Tunes on the whole table with inner splits, then refits the winner on all rows.
FinalFit final_fit(const PolymerTable& table, ModelKind kind, const CVOptions& options = {});

struct BenchmarkCell {
    std::string polymer;
    ModelKind kind = ModelKind::linear;
    MetricsSummary summary;
    std::string error;  // nonempty when the learner could not be evaluated
};

std::vector<BenchmarkCell> benchmark(const std::vector<StudyRecord>& records,
                                     const std::vector<std::string>& polymers,
                                     const std::vector<ModelKind>& kinds, const CVOptions& options = {});

// "mean ± sd" with fixed decimals; "NA" for empty stats.
std::string format_mean_sd(const MetricStat& stat, int decimals);

// Plain-text matrix: one row per polymer and model, RMSE / MAE / R2 columns.
std::string render_benchmark(const std::vector<BenchmarkCell>& cells);

}  // namespace fibredist
