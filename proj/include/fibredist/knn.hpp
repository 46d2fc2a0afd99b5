#pragma once

#include <vector>

#include "fibredist/common.hpp"
#include "fibredist/parallel.hpp"

namespace fibredist {

// k-nearest-neighbour regression by Euclidean distance. Ties in distance go
// to the lower training index.
struct KnnModel {
    Matrix train_x;
    Vector train_y;
    int k = 5;

    // Training indices of the k nearest rows to the query, nearest first.
    std::vector<int> neighbours(const Eigen::Ref<const Eigen::RowVectorXd>& query) const;
    Vector predict(const Matrix& x, Backend backend = kDefaultBackend) const;
};

KnnModel fit_knn(const Matrix& x, const Vector& y, int k);

}  // namespace fibredist
