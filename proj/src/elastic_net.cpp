#include "fibredist/elastic_net.hpp"

#include <algorithm>
#include <cmath>

namespace fibredist {

Vector ElasticNetFit::predict(const Matrix& x) const {
    return (x * coef).array() + intercept;
}

double elastic_net_lambda_max(const Matrix& x, const Vector& y, double alpha) {
    const double n = static_cast<double>(x.rows());
    const Matrix xc = x.rowwise() - x.colwise().mean();
    const Vector yc = y.array() - y.mean();
    const double top = (xc.transpose() * yc).cwiseAbs().maxCoeff();
    return top / (n * std::max(alpha, 1e-3));
}

namespace {

double soft_threshold(double z, double gamma) {
    if (z > gamma) return z - gamma;
    if (z < -gamma) return z + gamma;
    return 0.0;
}

}  // namespace

ElasticNetFit fit_elastic_net(const Matrix& x, const Vector& y, double alpha, double lambda,
                              const ElasticNetOptions& options) {
    if (alpha < 0 || alpha > 1 || lambda < 0) {
        throw Error(ErrorCode::invalid_argument, "elastic net needs alpha in [0,1] and lambda >= 0");
    }
    if (x.rows() == 0 || y.size() != x.rows()) {
        throw Error(ErrorCode::invalid_argument, "elastic net needs matching non-empty x and y");
    }
    const double n = static_cast<double>(x.rows());
    const Eigen::Index p = x.cols();
    const Eigen::RowVectorXd x_mean = x.colwise().mean();
    const Matrix xc = x.rowwise() - x_mean;
    const double y_mean = y.mean();
    const Vector yc = y.array() - y_mean;

    const Matrix gram = xc.transpose() * xc / n;
    // grad = (1/n) X^T (y - X b), kept current as coefficients move.
    Vector grad = xc.transpose() * yc / n;
    Vector beta = Vector::Zero(p);
    const double l1 = lambda * alpha;
    const double l2 = lambda * (1.0 - alpha);

    ElasticNetFit fit;
    fit.alpha = alpha;
    fit.lambda = lambda;
    bool converged = false;
    for (int sweep = 1; sweep <= options.max_sweeps; ++sweep) {
        double max_change = 0;
        for (Eigen::Index j = 0; j < p; ++j) {
            const double gjj = gram(j, j);
            if (gjj <= 0) continue;
            const double old = beta(j);
            const double updated = soft_threshold(grad(j) + gjj * old, l1) / (gjj + l2);
            const double delta = updated - old;
            if (delta != 0.0) {
                beta(j) = updated;
                grad -= gram.col(j) * delta;
                max_change = std::max(max_change, std::abs(delta));
            }
        }
        fit.sweeps = sweep;
        if (max_change < options.tolerance) {
            converged = true;
            break;
        }
    }
    if (!converged) {
        throw Error(ErrorCode::not_converged, "elastic net did not converge within " +
                                                  std::to_string(options.max_sweeps) + " sweeps");
    }
    fit.coef = beta;
    fit.intercept = y_mean - x_mean.dot(beta);
    return fit;
}

}  // namespace fibredist
