#pragma once

#include <vector>

#include "fibredist/common.hpp"

namespace fibredist {

// One hinge factor: max(0, x[var] - knot) for direction +1,
// max(0, knot - x[var]) for direction -1.
struct HingeFactor {
    int var = 0;
    double knot = 0;
    int direction = 1;

    double operator()(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
        const double d = direction > 0 ? row(var) - knot : knot - row(var);
        return d > 0 ? d : 0.0;
    }
};

// A basis term is a product of hinge factors; the empty product is the intercept.
using MarsTerm = std::vector<HingeFactor>;

struct MarsModel {
    std::vector<MarsTerm> terms;  // terms[0] is the intercept
    Vector coef;
    int degree = 1;
    double gcv = 0;
    double rss = 0;

    Vector predict(const Matrix& x) const;
};

struct MarsOptions {
    int degree = 1;
    int nprune = 30;
    int max_terms = 30;            // forward pass never exceeds this many terms
    double min_gain = 1e-4;        // stop when RSS improvement < min_gain * SS_total
};

// Output of the forward pass; pruning depends on nprune only, so one forward
// pass can serve several nprune values.
struct MarsForward {
    std::vector<MarsTerm> terms;
    Matrix basis;  // n x terms.size()
    int degree = 1;
};

MarsForward mars_forward(const Matrix& x, const Vector& y, const MarsOptions& options);
MarsModel mars_prune(const MarsForward& forward, const Vector& y, int nprune);
MarsModel fit_mars(const Matrix& x, const Vector& y, const MarsOptions& options);

Matrix mars_basis(const std::vector<MarsTerm>& terms, const Matrix& x);

// Effective parameter count used in GCV: M + penalty (M - 1) / 2, with
// penalty 2 for additive models and 3 when interactions are allowed.
double mars_effective_params(int terms, int degree);

}  // namespace fibredist
