#pragma once

#include "fibredist/common.hpp"

namespace fibredist {

// Minimises (1/2n) sum (y - b0 - x b)^2 + lambda [alpha |b|_1 + (1 - alpha) |b|_2^2 / 2]
// by cyclic coordinate descent with covariance updates.
struct ElasticNetFit {
    double intercept = 0;
    Vector coef;
    double alpha = 0;
    double lambda = 0;
    int sweeps = 0;

    Vector predict(const Matrix& x) const;
};

struct ElasticNetOptions {
    double tolerance = 1e-7;  // max absolute coefficient change per sweep
    int max_sweeps = 100000;
};

// Smallest lambda at which every slope is zero:
// max_j |<x_j - mean, y - ybar>| / (n * max(alpha, 1e-3)).
double elastic_net_lambda_max(const Matrix& x, const Vector& y, double alpha);

ElasticNetFit fit_elastic_net(const Matrix& x, const Vector& y, double alpha, double lambda,
                              const ElasticNetOptions& options = {});

}  // namespace fibredist
