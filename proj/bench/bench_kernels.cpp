// Serial reference vs OpenMP for the data-parallel kernels.
// Arg 0 selects Backend::serial, 1 Backend::openmp.

#include <benchmark/benchmark.h>

#include <numeric>

#include "fibredist/forest.hpp"
#include "fibredist/interpret.hpp"
#include "fibredist/knn.hpp"
#include "fibredist/validation.hpp"

using namespace fibredist;

namespace {

const PolymerTable& table() {
    static const PolymerTable t = [] {
        SyntheticConfig config;
        return polymer_subset(generate_synthetic(config).records, config.polymer);
    }();
    return t;
}

Backend backend_of(const benchmark::State& state) { return state.range(0) ? Backend::openmp : Backend::serial; }

const TrainedModel& knn_model() {
    static const TrainedModel m = train_model(table().features, table().target, table().feature_names, KnnParams{5});
    return m;
}

void BM_ForestFit(benchmark::State& state) {
    const auto& t = table();
    const NormalizationRecipe recipe = fit_recipe(t.features, t.feature_names);
    const Matrix z = apply_recipe(recipe, t.features);
    ForestOptions options;
    options.mtry = 2;
    options.n_trees = 100;
    options.backend = backend_of(state);
    for (auto _ : state) benchmark::DoNotOptimize(fit_forest(z, t.target, options));
}

void BM_KnnPredict(benchmark::State& state) {
    const auto& t = table();
    for (auto _ : state) benchmark::DoNotOptimize(knn_model().predict(t.features, backend_of(state)));
}

void BM_Shap(benchmark::State& state) {
    const auto& t = table();
    ShapOptions options;
    options.sims = 10;
    options.backend = backend_of(state);
    for (auto _ : state) benchmark::DoNotOptimize(shap_values(knn_model(), t.features.topRows(50), t.features, options));
}

void BM_PermutationImportance(benchmark::State& state) {
    const auto& t = table();
    ImportanceOptions options;
    options.backend = backend_of(state);
    for (auto _ : state) benchmark::DoNotOptimize(permutation_importance(knn_model(), t.features, t.target, options));
}

void BM_Tune(benchmark::State& state) {
    const auto& t = table();
    IndexList rows(t.rows());
    std::iota(rows.begin(), rows.end(), 0);
    const auto splits = make_inner_splits(rows, kDefaultSeed, {});
    const auto grid = default_grid(ModelKind::knn, static_cast<int>(t.cols()));
    TuneOptions options;
    options.backend = backend_of(state);
    for (auto _ : state) benchmark::DoNotOptimize(tune(t.features, t.target, t.feature_names, splits, grid, options));
}

}  // namespace

BENCHMARK(BM_ForestFit)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_KnnPredict)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Shap)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PermutationImportance)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Tune)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
