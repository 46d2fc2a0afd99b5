#pragma once

#include "fibredist/common.hpp"

namespace fibredist {

// Ordinary least squares with an intercept.
struct LinearFit {
    double intercept = 0;
    Vector coef;
    Vector std_error;  // NaN when the residual degrees of freedom are zero
    Vector t_stat;
    double intercept_std_error = 0;
    double residual_sd = 0;
    bool rank_deficient = false;  // minimum-norm solution was used

    Vector predict(const Matrix& x) const;
};

LinearFit fit_linear(const Matrix& x, const Vector& y);

}  // namespace fibredist
