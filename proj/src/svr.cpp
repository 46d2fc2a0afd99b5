#include "fibredist/svr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace fibredist {

double rbf_kernel(const Eigen::Ref<const Eigen::RowVectorXd>& a,
                  const Eigen::Ref<const Eigen::RowVectorXd>& b, double sigma) {
    return std::exp(-sigma * (a - b).squaredNorm());
}

Vector SvrFit::predict(const Matrix& x) const {
    Vector out(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        double f = bias;
        for (Eigen::Index s = 0; s < support.rows(); ++s) {
            f += coef(s) * rbf_kernel(support.row(s), x.row(i), sigma);
        }
        out(i) = f * y_scale + y_center;
    }
    return out;
}

namespace {

// Kernel rows on demand. Small problems keep the full matrix; larger ones
// hold a bounded least-recently-used set of rows.
class KernelRows {
public:
    KernelRows(const Matrix& x, double sigma) : x_(x), sigma_(sigma) {
        const auto n = static_cast<std::size_t>(x.rows());
        constexpr std::size_t kBudgetDoubles = 32u << 20;  // 256 MiB
        capacity_ = std::max<std::size_t>(2, std::min(n, kBudgetDoubles / std::max<std::size_t>(n, 1)));
        slot_of_.assign(n, -1);
        sq_norm_.resize(n);
        for (std::size_t i = 0; i < n; ++i) sq_norm_[i] = x.row(static_cast<Eigen::Index>(i)).squaredNorm();
    }

    const double* row(int i) {
        int slot = slot_of_[static_cast<std::size_t>(i)];
        if (slot < 0) {
            if (rows_.size() < capacity_) {
                slot = static_cast<int>(rows_.size());
                rows_.emplace_back(static_cast<std::size_t>(x_.rows()));
                owner_.push_back(i);
                stamp_.push_back(0);
            } else {
                slot = static_cast<int>(std::min_element(stamp_.begin(), stamp_.end()) - stamp_.begin());
                slot_of_[static_cast<std::size_t>(owner_[static_cast<std::size_t>(slot)])] = -1;
                owner_[static_cast<std::size_t>(slot)] = i;
            }
            slot_of_[static_cast<std::size_t>(i)] = slot;
            fill(i, rows_[static_cast<std::size_t>(slot)]);
        }
        stamp_[static_cast<std::size_t>(slot)] = ++clock_;
        return rows_[static_cast<std::size_t>(slot)].data();
    }

private:
    void fill(int i, std::vector<double>& out) const {
        const auto xi = x_.row(i);
        for (Eigen::Index j = 0; j < x_.rows(); ++j) {
            const double d2 = std::max(0.0, sq_norm_[static_cast<std::size_t>(i)] +
                                                sq_norm_[static_cast<std::size_t>(j)] -
                                                2.0 * xi.dot(x_.row(j)));
            out[static_cast<std::size_t>(j)] = j == i ? 1.0 : std::exp(-sigma_ * d2);
        }
    }

    const Matrix& x_;
    double sigma_;
    std::size_t capacity_;
    std::vector<int> slot_of_;
    std::vector<std::vector<double>> rows_;
    std::vector<int> owner_;
    std::vector<std::uint64_t> stamp_;
    std::vector<double> sq_norm_;
    std::uint64_t clock_ = 0;
};

constexpr double kTau = 1e-12;

}  // namespace

SvrFit fit_svr(const Matrix& x, const Vector& y, const SvrOptions& options) {
    const Eigen::Index n = x.rows();
    if (n < 1 || y.size() != n) {
        throw Error(ErrorCode::invalid_argument, "svr needs matching non-empty x and y");
    }
    if (!(options.sigma > 0) || !(options.cost > 0) || options.epsilon < 0) {
        throw Error(ErrorCode::invalid_argument, "svr needs sigma > 0, C > 0, epsilon >= 0");
    }
    SvrFit fit;
    fit.sigma = options.sigma;
    Vector z = y;
    if (options.standardize_target && n > 1) {
        fit.y_center = y.mean();
        const double sd = std::sqrt((y.array() - fit.y_center).square().sum() / static_cast<double>(n - 1));
        fit.y_scale = sd > 0 ? sd : 1.0;
        z = (y.array() - fit.y_center) / fit.y_scale;
    } else if (options.standardize_target) {
        fit.y_center = y(0);
        z = Vector::Zero(1);
    }

    // Dual over 2n variables: a_i for i < n (sign +1), a_i^* for i >= n (sign -1).
    // minimise 0.5 a^T Q a + p^T a, Q_ij = s_i s_j K, 0 <= a <= C, s^T a = 0.
    const auto nn = static_cast<std::size_t>(n);
    const std::size_t m = 2 * nn;
    const double c = options.cost;
    std::vector<double> alpha(m, 0.0), grad(m), p(m);
    std::vector<signed char> sign(m);
    for (std::size_t i = 0; i < nn; ++i) {
        p[i] = options.epsilon - z(static_cast<Eigen::Index>(i));
        p[i + nn] = options.epsilon + z(static_cast<Eigen::Index>(i));
        sign[i] = 1;
        sign[i + nn] = -1;
    }
    grad = p;
    KernelRows kernel(x, options.sigma);
    auto upper = [&](std::size_t t) { return alpha[t] >= c; };
    auto lower = [&](std::size_t t) { return alpha[t] <= 0; };

    long iter = 0;
    for (;; ++iter) {
        // Working set: maximal violating i, then j by second-order gain.
        double gmax = -std::numeric_limits<double>::infinity();
        double gmax2 = -std::numeric_limits<double>::infinity();
        long gi = -1, gj = -1;
        for (std::size_t t = 0; t < m; ++t) {
            if (sign[t] == 1) {
                if (!upper(t) && -grad[t] >= gmax) {
                    gmax = -grad[t];
                    gi = static_cast<long>(t);
                }
            } else if (!lower(t) && grad[t] >= gmax) {
                gmax = grad[t];
                gi = static_cast<long>(t);
            }
        }
        if (gi < 0) break;
        const auto i = static_cast<std::size_t>(gi);
        const double* ki = kernel.row(static_cast<int>(i % nn));
        double obj_min = std::numeric_limits<double>::infinity();
        for (std::size_t t = 0; t < m; ++t) {
            const double qit = sign[i] * sign[t] * ki[t % nn];
            if (sign[t] == 1) {
                if (!lower(t)) {
                    const double diff = gmax + grad[t];
                    gmax2 = std::max(gmax2, grad[t]);
                    if (diff > 0) {
                        double quad = 2.0 - 2.0 * sign[i] * qit;
                        if (quad <= 0) quad = kTau;
                        const double obj = -(diff * diff) / quad;
                        if (obj <= obj_min) {
                            obj_min = obj;
                            gj = static_cast<long>(t);
                        }
                    }
                }
            } else if (!upper(t)) {
                const double diff = gmax - grad[t];
                gmax2 = std::max(gmax2, -grad[t]);
                if (diff > 0) {
                    double quad = 2.0 + 2.0 * sign[i] * qit;
                    if (quad <= 0) quad = kTau;
                    const double obj = -(diff * diff) / quad;
                    if (obj <= obj_min) {
                        obj_min = obj;
                        gj = static_cast<long>(t);
                    }
                }
            }
        }
        if (gmax + gmax2 < options.tolerance || gj < 0) break;
        if (iter >= options.max_iterations) {
            throw Error(ErrorCode::not_converged,
                        "svr did not reach the KKT tolerance within " +
                            std::to_string(options.max_iterations) + " iterations");
        }

        const auto j = static_cast<std::size_t>(gj);
        const double* kj = kernel.row(static_cast<int>(j % nn));
        // kernel.row may have evicted ki; re-fetch when rows are cached.
        ki = kernel.row(static_cast<int>(i % nn));
        const double qij = sign[i] * sign[j] * ki[j % nn];
        const double old_i = alpha[i], old_j = alpha[j];
        if (sign[i] != sign[j]) {
            double quad = 2.0 + 2.0 * qij;
            if (quad <= 0) quad = kTau;
            const double delta = (-grad[i] - grad[j]) / quad;
            const double diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if (diff > 0) {
                if (alpha[j] < 0) {
                    alpha[j] = 0;
                    alpha[i] = diff;
                }
            } else if (alpha[i] < 0) {
                alpha[i] = 0;
                alpha[j] = -diff;
            }
            if (diff > 0) {
                if (alpha[i] > c) {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if (alpha[j] > c) {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            double quad = 2.0 - 2.0 * qij;
            if (quad <= 0) quad = kTau;
            const double delta = (grad[i] - grad[j]) / quad;
            const double sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if (sum > c) {
                if (alpha[i] > c) {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if (alpha[j] < 0) {
                alpha[j] = 0;
                alpha[i] = sum;
            }
            if (sum > c) {
                if (alpha[j] > c) {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if (alpha[i] < 0) {
                alpha[i] = 0;
                alpha[j] = sum;
            }
        }
        const double di = (alpha[i] - old_i) * sign[i];
        const double dj = (alpha[j] - old_j) * sign[j];
        for (std::size_t t = 0; t < nn; ++t) {
            const double change = ki[t] * di + kj[t] * dj;
            grad[t] += change;
            grad[t + nn] -= change;
        }
    }
    fit.iterations = iter;

    // Offset: mean of y_t grad_t over free variables, else the midpoint of the
    // feasible interval.
    double ub = std::numeric_limits<double>::infinity();
    double lb = -std::numeric_limits<double>::infinity();
    double free_sum = 0;
    int free_count = 0;
    for (std::size_t t = 0; t < m; ++t) {
        const double yg = sign[t] * grad[t];
        if (upper(t)) {
            if (sign[t] == -1) ub = std::min(ub, yg); else lb = std::max(lb, yg);
        } else if (lower(t)) {
            if (sign[t] == 1) ub = std::min(ub, yg); else lb = std::max(lb, yg);
        } else {
            ++free_count;
            free_sum += yg;
        }
    }
    const double rho = free_count > 0 ? free_sum / free_count : 0.5 * (ub + lb);
    fit.bias = -rho;

    double objective = 0;
    for (std::size_t t = 0; t < m; ++t) objective += alpha[t] * (grad[t] + p[t]);
    fit.dual_objective = 0.5 * objective;

    std::vector<Eigen::Index> support;
    for (std::size_t t = 0; t < nn; ++t) {
        if (alpha[t] - alpha[t + nn] != 0.0) support.push_back(static_cast<Eigen::Index>(t));
    }
    fit.support.resize(static_cast<Eigen::Index>(support.size()), x.cols());
    fit.coef.resize(static_cast<Eigen::Index>(support.size()));
    for (std::size_t s = 0; s < support.size(); ++s) {
        const auto t = static_cast<std::size_t>(support[s]);
        fit.support.row(static_cast<Eigen::Index>(s)) = x.row(support[s]);
        fit.coef(static_cast<Eigen::Index>(s)) = alpha[t] - alpha[t + nn];
    }
    return fit;
}

double estimate_sigma(const Matrix& x, std::uint64_t seed) {
    const Eigen::Index n = x.rows();
    if (n < 2) throw Error(ErrorCode::degenerate_data, "sigma estimation needs at least 2 rows");
    constexpr std::size_t kMaxPairs = 1000;
    std::vector<double> inv;
    auto consider = [&](Eigen::Index a, Eigen::Index b) {
        const double d2 = (x.row(a) - x.row(b)).squaredNorm();
        if (d2 > 0) inv.push_back(1.0 / d2);
    };
    const auto all_pairs = static_cast<std::size_t>(n) * static_cast<std::size_t>(n - 1) / 2;
    if (all_pairs <= kMaxPairs) {
        for (Eigen::Index a = 0; a < n; ++a) {
            for (Eigen::Index b = a + 1; b < n; ++b) consider(a, b);
        }
    } else {
        Rng rng(derive_seed(seed, "svr.sigma"));
        for (std::size_t k = 0; k < kMaxPairs; ++k) {
            const auto a = static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::size_t>(n)));
            auto b = static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::size_t>(n - 1)));
            if (b >= a) ++b;
            consider(a, b);
        }
    }
    if (inv.empty()) throw Error(ErrorCode::degenerate_data, "all rows are identical; sigma is undefined");
    std::sort(inv.begin(), inv.end());
    const std::size_t k = inv.size();
    return k % 2 == 1 ? inv[k / 2] : 0.5 * (inv[k / 2 - 1] + inv[k / 2]);
}

}  // namespace fibredist
