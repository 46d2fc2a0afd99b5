#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "fibredist/common.hpp"
#include "fibredist/dataset.hpp"
#include "fibredist/elastic_net.hpp"
#include "fibredist/forest.hpp"
#include "fibredist/knn.hpp"
#include "fibredist/linear.hpp"
#include "fibredist/mars.hpp"
#include "fibredist/parallel.hpp"
#include "fibredist/svr.hpp"
#include "fibredist/tree.hpp"

namespace fibredist {

enum class ModelKind { linear, elastic_net, tree, forest, svr_rbf, knn, mars };

inline constexpr std::array<ModelKind, 7> kAllModelKinds = {
    ModelKind::linear, ModelKind::elastic_net, ModelKind::tree, ModelKind::forest,
    ModelKind::svr_rbf, ModelKind::knn,         ModelKind::mars};

std::string_view to_string(ModelKind kind);       // "LINEAR", "ELASTIC_NET", ...
ModelKind parse_model_kind(std::string_view name);  // case-insensitive; throws invalid_argument

struct LinearParams {};
struct ElasticNetParams {
    double alpha = 0.5;
    double lambda = 0;           // absolute penalty; 0 means "resolve from lambda_ratio"
    double lambda_ratio = 1.0;   // fraction of lambda_max on the training data
};
struct TreeParams {
    double cp = 0.01;
};
struct ForestParams {
    int mtry = 1;
    int min_node_size = 5;
    int n_trees = 500;
};
struct SvrParams {
    double sigma = 0;  // 0 means "estimate from the training data"
    double cost = 1;
    double epsilon = 0.1;
};
struct KnnParams {
    int k = 5;
};
struct MarsParams {
    int degree = 1;
    int nprune = 10;
};

// Alternative order follows ModelKind.
using HyperParams = std::variant<LinearParams, ElasticNetParams, TreeParams, ForestParams, SvrParams,
                                 KnnParams, MarsParams>;

ModelKind kind_of(const HyperParams& params);
std::string describe(const HyperParams& params);  // "k=5", "alpha=0.5, lambda=..." etc.

// Hyperparameter grid for a learner over p features. Data-dependent values
// (elastic-net lambda, RBF sigma) are left as placeholders and filled in by
// resolve_params on the data the grid is tuned on.
std::vector<HyperParams> default_grid(ModelKind kind, int p);

// Fills data-dependent placeholders using standardised training rows.
HyperParams resolve_params(const HyperParams& params, const Matrix& z, const Vector& y,
                           std::uint64_t seed);

using FittedState = std::variant<LinearFit, ElasticNetFit, RegressionTree, RandomForest, SvrFit,
                                 KnnModel, MarsModel>;

struct TrainedModel {
    ModelKind kind = ModelKind::linear;
    HyperParams params;  // resolved
    NormalizationRecipe recipe;
    double y_min = 0;
    double y_max = 0;
    FittedState state;

    // rows in the recipe's all_features layout, raw units.
    Vector predict(const Matrix& rows, Backend backend = kDefaultBackend) const;
    // rows with named columns; throws missing_feature when a kept feature is absent.
    Vector predict(const Matrix& rows, const std::vector<std::string>& names,
                   Backend backend = kDefaultBackend) const;
    // rows already standardised with the recipe (kept features only).
    Vector predict_standardized(const Matrix& z, Backend backend = kDefaultBackend) const;

    const std::vector<std::string>& features() const { return recipe.kept_features; }
};

struct TrainOptions {
    std::uint64_t seed = kDefaultSeed;
    Backend backend = kDefaultBackend;
};

// Fits the recipe on x, standardises, resolves placeholders and fits.
TrainedModel train_model(const Matrix& x, const Vector& y, const std::vector<std::string>& names,
                         const HyperParams& params, const TrainOptions& options = {});

// Fits on rows that are already standardised by recipe.
TrainedModel train_standardized(const NormalizationRecipe& recipe, const Matrix& z, const Vector& y,
                                const HyperParams& params, const TrainOptions& options = {});

// Self-describing JSON text; deserialize(serialize(m)) predicts bit-identically.
std::string serialize_model(const TrainedModel& model);
TrainedModel deserialize_model(std::string_view text);

}  // namespace fibredist
