#include "fibredist/knn.hpp"

#include <algorithm>
#include <numeric>
#include <utility>

namespace fibredist {

KnnModel fit_knn(const Matrix& x, const Vector& y, int k) {
    if (x.rows() != y.size()) throw Error(ErrorCode::invalid_argument, "knn: x and y row counts differ");
    if (k < 1 || k > x.rows()) {
        throw Error(ErrorCode::invalid_argument,
                    "knn: k must lie in [1, n]; got k=" + std::to_string(k) + ", n=" +
                        std::to_string(x.rows()));
    }
    return KnnModel{x, y, k};
}

std::vector<int> KnnModel::neighbours(const Eigen::Ref<const Eigen::RowVectorXd>& query) const {
    const auto n = static_cast<int>(train_x.rows());
    std::vector<std::pair<double, int>> d(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) d[static_cast<std::size_t>(i)] = {(train_x.row(i) - query).squaredNorm(), i};
    const auto kk = static_cast<std::size_t>(std::min(k, n));
    std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(kk), d.end());
    std::vector<int> out(kk);
    for (std::size_t i = 0; i < kk; ++i) out[i] = d[i].second;
    return out;
}

Vector KnnModel::predict(const Matrix& x, Backend backend) const {
    Vector out(x.rows());
    parallel::for_each_index(backend, static_cast<std::size_t>(x.rows()), [&](std::size_t r) {
        const auto idx = neighbours(x.row(static_cast<Eigen::Index>(r)));
        double s = 0;
        for (int i : idx) s += train_y(i);
        out(static_cast<Eigen::Index>(r)) = s / static_cast<double>(idx.size());
    });
    return out;
}

}  // namespace fibredist
