#include "fibredist/mars.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace fibredist {

namespace {

double term_value(const MarsTerm& term, const Eigen::Ref<const Eigen::RowVectorXd>& row) {
    double v = 1.0;
    for (const auto& f : term) {
        v *= f(row);
        if (v == 0.0) break;
    }
    return v;
}

bool uses_var(const MarsTerm& term, int var) {
    return std::any_of(term.begin(), term.end(), [&](const HingeFactor& f) { return f.var == var; });
}

// Appends column c to the orthonormal set q (Gram-Schmidt, two passes).
// Returns false when c is numerically inside the current span.
bool orthonormal_append(Matrix& q, int& m, const Vector& c) {
    const double norm0 = c.norm();
    if (norm0 == 0) return false;
    Vector w = c;
    for (int pass = 0; pass < 2; ++pass) {
        if (m > 0) w -= q.leftCols(m) * (q.leftCols(m).transpose() * w);
    }
    const double norm = w.norm();
    if (norm < 1e-8 * norm0) return false;
    q.col(m) = w / norm;
    ++m;
    return true;
}

struct Candidate {
    double gain = -1;
    int parent = -1;
    int var = -1;
    double knot = 0;
};

}  // namespace

double mars_effective_params(int terms, int degree) {
    const double penalty = degree <= 1 ? 2.0 : 3.0;
    return terms + penalty * (terms - 1) / 2.0;
}

Matrix mars_basis(const std::vector<MarsTerm>& terms, const Matrix& x) {
    Matrix b(x.rows(), static_cast<Eigen::Index>(terms.size()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (std::size_t t = 0; t < terms.size(); ++t) {
            b(i, static_cast<Eigen::Index>(t)) = term_value(terms[t], x.row(i));
        }
    }
    return b;
}

Vector MarsModel::predict(const Matrix& x) const { return mars_basis(terms, x) * coef; }

MarsForward mars_forward(const Matrix& x, const Vector& y, const MarsOptions& options) {
    const Eigen::Index n = x.rows();
    const auto p = static_cast<int>(x.cols());
    if (n < 4) throw Error(ErrorCode::invalid_argument, "mars needs at least 4 rows");
    if (options.degree < 1 || options.degree > 2) {
        throw Error(ErrorCode::invalid_argument, "mars degree must be 1 or 2");
    }
    const int cap = std::max(1, options.max_terms);

    MarsForward fwd;
    fwd.degree = options.degree;
    fwd.terms.push_back({});
    Matrix basis(n, cap);
    basis.col(0).setOnes();
    Matrix q(n, cap);
    int m = 0;
    orthonormal_append(q, m, basis.col(0));
    Vector r = y - q.leftCols(m) * (q.leftCols(m).transpose() * y);
    const double ss_total = r.squaredNorm();

    std::vector<int> order(static_cast<std::size_t>(n));
    while (static_cast<int>(fwd.terms.size()) + 2 <= cap && ss_total > 0) {
        const int terms = static_cast<int>(fwd.terms.size());
        Candidate best;
        for (int parent = 0; parent < terms; ++parent) {
            if (static_cast<int>(fwd.terms[static_cast<std::size_t>(parent)].size()) >= options.degree) continue;
            const auto pcol = basis.col(parent);
            for (int var = 0; var < p; ++var) {
                if (uses_var(fwd.terms[static_cast<std::size_t>(parent)], var)) continue;
                // rows with nonzero parent, sorted by x[var]
                order.clear();
                for (Eigen::Index i = 0; i < n; ++i) {
                    if (pcol(i) != 0.0) order.push_back(static_cast<int>(i));
                }
                if (order.size() < 3) continue;
                std::stable_sort(order.begin(), order.end(),
                                 [&](int a, int b) { return x(a, var) < x(b, var); });
                const std::size_t k = order.size();
                // totals over the support
                double t_px = 0, t_p = 0, t_ppxx = 0, t_ppx = 0, t_pp = 0, t_pxr = 0, t_pr = 0;
                Vector t_qpx = Vector::Zero(m), t_qp = Vector::Zero(m);
                for (int i : order) {
                    const double pi = pcol(i), xi = x(i, var), ri = r(i);
                    t_px += pi * xi;
                    t_p += pi;
                    t_ppxx += pi * pi * xi * xi;
                    t_ppx += pi * pi * xi;
                    t_pp += pi * pi;
                    t_pxr += pi * xi * ri;
                    t_pr += pi * ri;
                    t_qpx += q.row(i).head(m).transpose() * (pi * xi);
                    t_qp += q.row(i).head(m).transpose() * pi;
                }
                // running sums over rows with x <= knot (left side)
                double l_ppxx = 0, l_ppx = 0, l_pp = 0, l_pxr = 0, l_pr = 0;
                Vector l_qpx = Vector::Zero(m), l_qp = Vector::Zero(m);
                const double x_min = x(order.front(), var);
                const double x_max = x(order.back(), var);
                for (std::size_t a = 0; a < k; ++a) {
                    const int i = order[a];
                    const double pi = pcol(i), xi = x(i, var), ri = r(i);
                    l_ppxx += pi * pi * xi * xi;
                    l_ppx += pi * pi * xi;
                    l_pp += pi * pi;
                    l_pxr += pi * xi * ri;
                    l_pr += pi * ri;
                    l_qpx += q.row(i).head(m).transpose() * (pi * xi);
                    l_qp += q.row(i).head(m).transpose() * pi;
                    if (a + 1 < k && x(order[a + 1], var) == xi) continue;  // end of tie block
                    const double t = xi;
                    if (t <= x_min || t >= x_max) continue;  // interior knots only
                    // u = p (x - t)_+ on the right side, v = p (t - x)_+ on the left side
                    const double ur = (t_pxr - l_pxr) - t * (t_pr - l_pr);
                    const double uu = (t_ppxx - l_ppxx) - 2 * t * (t_ppx - l_ppx) + t * t * (t_pp - l_pp);
                    const double vr = t * l_pr - l_pxr;
                    const double vv = l_ppxx - 2 * t * l_ppx + t * t * l_pp;
                    double qu2 = 0, qv2 = 0, quv = 0;
                    for (int c = 0; c < m; ++c) {
                        const double qu = (t_qpx(c) - l_qpx(c)) - t * (t_qp(c) - l_qp(c));
                        const double qv = t * l_qp(c) - l_qpx(c);
                        qu2 += qu * qu;
                        qv2 += qv * qv;
                        quv += qu * qv;
                    }
                    const double uu_o = uu - qu2;
                    const double vv_o = vv - qv2;
                    const double uv_o = -quv;
                    const bool u_ok = uu > 0 && uu_o > 1e-8 * uu;
                    const bool v_ok = vv > 0 && vv_o > 1e-8 * vv;
                    double gain;
                    if (u_ok && v_ok) {
                        const double det = uu_o * vv_o - uv_o * uv_o;
                        if (det <= 1e-8 * uu_o * vv_o) {
                            gain = std::max(ur * ur / uu_o, vr * vr / vv_o);
                        } else {
                            gain = (vv_o * ur * ur - 2 * uv_o * ur * vr + uu_o * vr * vr) / det;
                        }
                    } else if (u_ok) {
                        gain = ur * ur / uu_o;
                    } else if (v_ok) {
                        gain = vr * vr / vv_o;
                    } else {
                        continue;
                    }
                    if (gain > best.gain) best = {gain, parent, var, t};
                }
            }
        }
        if (best.parent < 0 || best.gain < options.min_gain * ss_total) break;

        const MarsTerm parent_term = fwd.terms[static_cast<std::size_t>(best.parent)];  // copy: terms grows below
        int added = 0;
        for (int direction : {1, -1}) {
            MarsTerm term = parent_term;
            term.push_back({best.var, best.knot, direction});
            Vector col(n);
            for (Eigen::Index i = 0; i < n; ++i) col(i) = basis(i, best.parent) * term.back()(x.row(i));
            if (!orthonormal_append(q, m, col)) continue;  // collinear with the current basis
            basis.col(static_cast<Eigen::Index>(fwd.terms.size())) = col;
            fwd.terms.push_back(std::move(term));
            ++added;
        }
        if (added == 0) break;
        r = y - q.leftCols(m) * (q.leftCols(m).transpose() * y);
    }
    fwd.basis = basis.leftCols(static_cast<Eigen::Index>(fwd.terms.size()));
    return fwd;
}

MarsModel mars_prune(const MarsForward& forward, const Vector& y, int nprune) {
    if (nprune < 1) throw Error(ErrorCode::invalid_argument, "mars nprune must be >= 1");
    const Eigen::Index n = forward.basis.rows();
    const int total = static_cast<int>(forward.terms.size());
    const Matrix gram = forward.basis.transpose() * forward.basis;
    const Vector bty = forward.basis.transpose() * y;
    const double yty = y.squaredNorm();

    auto gcv_of = [&](double rss, int size) {
        const double c = mars_effective_params(size, forward.degree);
        const double denom = 1.0 - c / static_cast<double>(n);
        if (denom <= 0) return std::numeric_limits<double>::infinity();
        return (rss / static_cast<double>(n)) / (denom * denom);
    };

    // Backward elimination: drop the term whose removal raises RSS least;
    // the intercept is never removed.
    std::vector<int> active(static_cast<std::size_t>(total));
    std::iota(active.begin(), active.end(), 0);
    std::vector<int> best_set;
    double best_gcv = std::numeric_limits<double>::infinity();
    double best_rss = 0;
    std::vector<std::pair<std::vector<int>, std::pair<double, double>>> path;  // set, (rss, gcv)
    while (true) {
        const auto s = static_cast<Eigen::Index>(active.size());
        Matrix g(s, s);
        Vector b(s);
        for (Eigen::Index a = 0; a < s; ++a) {
            b(a) = bty(active[static_cast<std::size_t>(a)]);
            for (Eigen::Index c = 0; c < s; ++c) {
                g(a, c) = gram(active[static_cast<std::size_t>(a)], active[static_cast<std::size_t>(c)]);
            }
        }
        const Eigen::LDLT<Matrix> ldlt(g);
        const Matrix h = ldlt.solve(Matrix::Identity(s, s));
        const Vector beta = h * b;
        const double rss = std::max(0.0, yty - beta.dot(b));
        path.push_back({active, {rss, gcv_of(rss, static_cast<int>(s))}});
        if (s == 1) break;
        Eigen::Index drop = -1;
        double cost = std::numeric_limits<double>::infinity();
        for (Eigen::Index a = 1; a < s; ++a) {
            const double c = beta(a) * beta(a) / h(a, a);
            if (c < cost) {
                cost = c;
                drop = a;
            }
        }
        active.erase(active.begin() + drop);
    }
    // smallest GCV among sets no larger than nprune; ties go to the smaller set
    for (auto it = path.rbegin(); it != path.rend(); ++it) {
        if (static_cast<int>(it->first.size()) > nprune) continue;
        if (it->second.second < best_gcv || best_set.empty()) {
            best_gcv = it->second.second;
            best_rss = it->second.first;
            best_set = it->first;
        }
    }

    MarsModel model;
    model.degree = forward.degree;
    model.gcv = best_gcv;
    model.rss = best_rss;
    Matrix b(n, static_cast<Eigen::Index>(best_set.size()));
    for (std::size_t j = 0; j < best_set.size(); ++j) {
        model.terms.push_back(forward.terms[static_cast<std::size_t>(best_set[j])]);
        b.col(static_cast<Eigen::Index>(j)) = forward.basis.col(best_set[j]);
    }
    model.coef = b.colPivHouseholderQr().solve(y);
    return model;
}

MarsModel fit_mars(const Matrix& x, const Vector& y, const MarsOptions& options) {
    return mars_prune(mars_forward(x, y, options), y, options.nprune);
}

}  // namespace fibredist
