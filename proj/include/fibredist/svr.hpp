#pragma once

#include <cstdint>

#include "fibredist/common.hpp"

namespace fibredist {

// epsilon-insensitive support vector regression with the RBF kernel
// k(x, z) = exp(-sigma |x - z|^2).
struct SvrOptions {
    double sigma = 1.0;
    double cost = 1.0;
    double epsilon = 0.1;
    double tolerance = 1e-3;  // maximal KKT violation at termination
    long max_iterations = 100000;
    // Fit on (y - mean) / sd and map predictions back. The C and epsilon grids
    // are meant for a unit-scale target; raw nanometre targets would need a
    // C several orders of magnitude larger.
    bool standardize_target = true;
};

struct SvrFit {
    Matrix support;  // support vectors (rows)
    Vector coef;     // beta_i = alpha_i - alpha_i^*, on the fitted target scale
    double bias = 0;
    double sigma = 1.0;
    double y_center = 0;
    double y_scale = 1;
    long iterations = 0;
    double dual_objective = 0;  // 0.5 a^T Q a + p^T a on the fitted scale

    Vector predict(const Matrix& x) const;
};

SvrFit fit_svr(const Matrix& x, const Vector& y, const SvrOptions& options);

double rbf_kernel(const Eigen::Ref<const Eigen::RowVectorXd>& a,
                  const Eigen::Ref<const Eigen::RowVectorXd>& b, double sigma);

// Kernel width from the median inverse squared distance between row pairs:
// every pair when there are at most 1000, otherwise 1000 seeded random pairs.
// Zero-distance pairs are ignored.
double estimate_sigma(const Matrix& x, std::uint64_t seed);

}  // namespace fibredist
