#include "fibredist/linear.hpp"

#include <cmath>
#include <limits>

namespace fibredist {

Vector LinearFit::predict(const Matrix& x) const {
    return (x * coef).array() + intercept;
}

LinearFit fit_linear(const Matrix& x, const Vector& y) {
    const Eigen::Index n = x.rows();
    const Eigen::Index p = x.cols();
    if (n == 0 || y.size() != n) {
        throw Error(ErrorCode::invalid_argument, "linear fit needs matching non-empty x and y");
    }
    Matrix design(n, p + 1);
    design.col(0).setOnes();
    design.rightCols(p) = x;

    LinearFit fit;
    Vector beta;
    Eigen::ColPivHouseholderQR<Matrix> qr(design);
    if (qr.rank() == p + 1) {
        beta = qr.solve(y);
    } else {
        fit.rank_deficient = true;
        beta = design.completeOrthogonalDecomposition().solve(y);
    }
    fit.intercept = beta(0);
    fit.coef = beta.tail(p);

    const Vector resid = y - design * beta;
    const double rss = resid.squaredNorm();
    const Eigen::Index df = n - (p + 1);
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    fit.std_error = Vector::Constant(p, nan);
    fit.t_stat = Vector::Constant(p, nan);
    fit.intercept_std_error = nan;
    fit.residual_sd = df > 0 ? std::sqrt(rss / static_cast<double>(df)) : nan;
    if (!fit.rank_deficient && df > 0) {
        // (A^T A)^{-1} = P R^{-1} R^{-T} P^T from the pivoted QR.
        const Matrix r = qr.matrixR().topLeftCorner(p + 1, p + 1).template triangularView<Eigen::Upper>();
        const Matrix r_inv = r.triangularView<Eigen::Upper>().solve(Matrix::Identity(p + 1, p + 1));
        const Matrix cov_perm = r_inv * r_inv.transpose();
        const auto& perm = qr.colsPermutation();
        const Matrix cov = perm * cov_perm * perm.transpose();
        const double sigma2 = rss / static_cast<double>(df);
        fit.intercept_std_error = std::sqrt(sigma2 * cov(0, 0));
        for (Eigen::Index j = 0; j < p; ++j) {
            fit.std_error(j) = std::sqrt(sigma2 * cov(j + 1, j + 1));
            fit.t_stat(j) = fit.coef(j) / fit.std_error(j);
        }
    }
    return fit;
}

}  // namespace fibredist
