#pragma once

#include <vector>

#include "fibredist/common.hpp"

namespace fibredist {

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0;
    int left = -1;
    int right = -1;
    double value = 0;   // weighted mean target of the node
    double weight = 0;  // number of (bootstrap-weighted) rows
};

// Binary regression tree; rows with x[feature] <= threshold go left.
struct RegressionTree {
    std::vector<TreeNode> nodes;
    Vector importance;  // sum-of-squares reduction credited to each feature

    double predict_row(const Matrix& x, Eigen::Index row) const;
    // Treats every node of weight <= min_split_weight as a leaf.
    double predict_row(const Matrix& x, Eigen::Index row, double min_split_weight) const;
    Vector predict(const Matrix& x) const;
    std::size_t leaf_count() const;
};

struct TreeOptions {
    double cp = 0.01;   // minimum split gain as a fraction of the root sum of squares
    int min_split = 20;
    int min_leaf = 7;
    int max_depth = 30;
};

// Greedy CART with exhaustive split search per node. Equal gains resolve to
// the lowest feature index, then the lowest threshold.
RegressionTree fit_tree(const Matrix& x, const Vector& y, const TreeOptions& options = {});

}  // namespace fibredist
