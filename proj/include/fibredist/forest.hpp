#pragma once

#include <cstdint>
#include <vector>

#include "fibredist/common.hpp"
#include "fibredist/parallel.hpp"
#include "fibredist/tree.hpp"

namespace fibredist {

struct ForestOptions {
    int mtry = 1;
    int min_node_size = 5;
    int n_trees = 500;
    std::uint64_t seed = kDefaultSeed;
    Backend backend = kDefaultBackend;
};

struct RandomForest {
    std::vector<RegressionTree> trees;
    Vector importance;  // mean per-tree sum-of-squares reduction

    Vector predict(const Matrix& x, Backend backend = kDefaultBackend) const;
    // Prediction of the forest that the same seed grows with a larger
    // min_node_size: nodes of weight <= min_node_size act as leaves.
    Vector predict_truncated(const Matrix& x, int min_node_size, Backend backend = kDefaultBackend) const;
};

// Bagged regression trees. Each tree sees a bootstrap resample (n draws with
// replacement, kept as integer row weights) and samples mtry candidate features
// per node without replacement. A node splits only when it holds more than
// min_node_size rows and some split reduces the sum of squares. Tree t draws
// its bootstrap from derive_seed(seed, "forest.tree", t), and each node draws
// its candidate features from a stream keyed by the node's path, so the result
// does not depend on the backend, the thread count, or which other nodes split.
RandomForest fit_forest(const Matrix& x, const Vector& y, const ForestOptions& options);

}  // namespace fibredist
