#include "fibredist/interpret.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fibredist {

std::vector<ImportanceRow> ImportanceTable::top(std::size_t n) const {
    return {rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(std::min(n, rows.size()))};
}

std::vector<double> scale_importance(const std::vector<double>& raw) {
    std::vector<double> out(raw.size(), 0.0);
    if (raw.empty()) return out;
    const auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
    const double min = *lo, max = *hi;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (max > min) {
            out[i] = 100.0 * (raw[i] - min) / (max - min);
        } else {
            out[i] = raw[i] > 0 ? 100.0 : 0.0;
        }
    }
    return out;
}

namespace {

double rmse(const Vector& y, const Vector& yhat) {
    return std::sqrt((y - yhat).squaredNorm() / static_cast<double>(y.size()));
}

}  // namespace

std::vector<double> permutation_importance(const TrainedModel& model, const Matrix& x, const Vector& y,
                                           const ImportanceOptions& options) {
    const auto& kept = model.recipe.kept_columns;
    const std::size_t p = kept.size();
    const auto reps = static_cast<std::size_t>(std::max(1, options.permutations));
    const double base = rmse(y, model.predict(x, Backend::serial));
    std::vector<double> increase(p * reps, 0.0);
    parallel::for_each_index(options.backend, p * reps, [&](std::size_t task) {
        const std::size_t j = task / reps;
        Matrix shuffled = x;
        IndexList perm(static_cast<std::size_t>(x.rows()));
        std::iota(perm.begin(), perm.end(), 0);
        Rng rng(derive_seed(options.seed, "importance.permutation", task));
        shuffle_in_place(perm, rng);
        const auto col = static_cast<Eigen::Index>(kept[j]);
        for (Eigen::Index i = 0; i < x.rows(); ++i) shuffled(i, col) = x(perm[static_cast<std::size_t>(i)], col);
        increase[task] = rmse(y, model.predict(shuffled, Backend::serial)) - base;
    });
    std::vector<double> out(p, 0.0);
    for (std::size_t j = 0; j < p; ++j) {
        for (std::size_t r = 0; r < reps; ++r) out[j] += increase[j * reps + r];
        out[j] /= static_cast<double>(reps);
    }
    return out;
}

ImportanceTable variable_importance(const TrainedModel& model, const PolymerTable& table,
                                    const ImportanceOptions& options) {
    ImportanceTable t;
    std::vector<double> kept_scores;
    std::visit(
        [&](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, LinearFit>) {
                t.method = "abs_t";
                for (Eigen::Index j = 0; j < s.t_stat.size(); ++j) {
                    kept_scores.push_back(std::isfinite(s.t_stat(j)) ? std::abs(s.t_stat(j)) : 0.0);
                }
            } else if constexpr (std::is_same_v<T, ElasticNetFit>) {
                t.method = "abs_coefficient";
                for (Eigen::Index j = 0; j < s.coef.size(); ++j) kept_scores.push_back(std::abs(s.coef(j)));
            } else if constexpr (std::is_same_v<T, RegressionTree> || std::is_same_v<T, RandomForest>) {
                t.method = "sse_reduction";
                for (Eigen::Index j = 0; j < s.importance.size(); ++j) kept_scores.push_back(s.importance(j));
            } else {
                t.method = "permutation";
                kept_scores = permutation_importance(model, table.features, table.target, options);
            }
        },
        model.state);

    const auto& all = model.recipe.all_features;
    std::vector<double> raw(all.size(), 0.0);
    for (std::size_t k = 0; k < model.recipe.kept_columns.size(); ++k) {
        raw[static_cast<std::size_t>(model.recipe.kept_columns[k])] = kept_scores[k];
    }
    const auto scaled = scale_importance(raw);
    std::vector<std::size_t> order(all.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return raw[a] > raw[b]; });
    for (std::size_t i : order) t.rows.push_back({all[i], raw[i], scaled[i]});
    return t;
}

IndexList sample_rows(std::size_t n, std::size_t max, std::uint64_t seed, std::string_view purpose) {
    IndexList rows(n);
    std::iota(rows.begin(), rows.end(), 0);
    if (n <= max) return rows;
    Rng rng(derive_seed(seed, purpose));
    for (std::size_t i = 0; i < max; ++i) std::swap(rows[i], rows[i + uniform_index(rng, n - i)]);
    rows.resize(max);
    std::sort(rows.begin(), rows.end());
    return rows;
}

ShapSummary shap_values(const TrainedModel& model, const Matrix& instances, const Matrix& background,
                        const ShapOptions& options) {
    if (background.rows() == 0) throw Error(ErrorCode::invalid_argument, "SHAP needs a nonempty background");
    if (options.sims < 1) throw Error(ErrorCode::invalid_argument, "SHAP needs at least one simulation");
    const IndexList bg_rows = sample_rows(static_cast<std::size_t>(background.rows()), options.max_background,
                                          options.seed, "shap.background");
    Matrix bg(static_cast<Eigen::Index>(bg_rows.size()), background.cols());
    for (std::size_t i = 0; i < bg_rows.size(); ++i) bg.row(static_cast<Eigen::Index>(i)) = background.row(bg_rows[i]);

    const auto& kept = model.recipe.kept_columns;
    const std::size_t p = kept.size();
    const auto n = static_cast<std::size_t>(instances.rows());
    const auto sims = static_cast<std::size_t>(options.sims);

    ShapSummary out;
    out.features = model.recipe.kept_features;
    out.background_rows = bg_rows.size();
    out.sims = options.sims;
    out.baseline = model.predict(bg, Backend::serial).mean();
    out.prediction = model.predict(instances, Backend::serial);

    // contribution[(j * sims + s)][i]
    std::vector<Vector> contribution(p * sims);
    parallel::for_each_index(options.backend, p * sims, [&](std::size_t task) {
        const std::size_t j = task / sims;
        Rng rng(derive_seed(options.seed, "shap.draw", task));
        std::vector<std::size_t> perm(p);
        std::iota(perm.begin(), perm.end(), 0);
        shuffle_in_place(perm, rng);
        const auto b = static_cast<Eigen::Index>(uniform_index(rng, bg_rows.size()));
        // features ahead of j in the ordering come from the instance
        std::vector<char> from_instance(p, 0);
        for (std::size_t k : perm) {
            if (k == j) break;
            from_instance[k] = 1;
        }
        Matrix with_j(instances.rows(), instances.cols());
        for (Eigen::Index i = 0; i < instances.rows(); ++i) with_j.row(i) = bg.row(b);
        for (std::size_t k = 0; k < p; ++k) {
            if (from_instance[k]) with_j.col(kept[k]) = instances.col(kept[k]);
        }
        Matrix without_j = with_j;
        with_j.col(kept[j]) = instances.col(kept[j]);
        contribution[task] = model.predict(with_j, Backend::serial) - model.predict(without_j, Backend::serial);
    });

    out.phi = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
    out.standard_error = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
    for (std::size_t j = 0; j < p; ++j) {
        Vector sum = Vector::Zero(static_cast<Eigen::Index>(n));
        Vector sumsq = Vector::Zero(static_cast<Eigen::Index>(n));
        for (std::size_t s = 0; s < sims; ++s) {
            const Vector& c = contribution[j * sims + s];
            sum += c;
            sumsq += c.cwiseProduct(c);
        }
        const auto col = static_cast<Eigen::Index>(j);
        out.phi.col(col) = sum / static_cast<double>(sims);
        if (sims > 1) {
            const double m = static_cast<double>(sims);
            const Vector var = ((sumsq - sum.cwiseProduct(sum) / m) / (m - 1.0)).cwiseMax(0.0);
            out.standard_error.col(col) = (var / m).cwiseSqrt();
        }
    }
    out.mean_abs = out.phi.cwiseAbs().colwise().mean().transpose();
    out.order.resize(p);
    std::iota(out.order.begin(), out.order.end(), 0);
    std::stable_sort(out.order.begin(), out.order.end(),
                     [&](int a, int b) { return out.mean_abs(a) > out.mean_abs(b); });
    return out;
}

double pearson(const Vector& a, const Vector& b) {
    const Vector da = a.array() - a.mean();
    const Vector db = b.array() - b.mean();
    const double denom = std::sqrt(da.squaredNorm() * db.squaredNorm());
    if (!(denom > 0)) return std::numeric_limits<double>::quiet_NaN();
    return std::clamp(da.dot(db) / denom, -1.0, 1.0);
}

CorrelationMatrix correlation_matrix(const PolymerTable& table) {
    if (table.rows() < 2) throw Error(ErrorCode::degenerate_data, "correlations need at least 2 rows");
    CorrelationMatrix out;
    std::vector<Vector> cols;
    auto consider = [&](const std::string& name, const Vector& v) {
        if (v.maxCoeff() == v.minCoeff()) {
            out.excluded_zero_variance.push_back(name);
        } else {
            out.names.push_back(name);
            cols.push_back(v);
        }
    };
    for (std::size_t j = 0; j < table.cols(); ++j) {
        consider(table.feature_names[j], table.features.col(static_cast<Eigen::Index>(j)));
    }
    consider("fibre_diameter", table.target);
    const auto m = static_cast<Eigen::Index>(cols.size());
    out.r = Matrix::Identity(m, m);
    for (Eigen::Index a = 0; a < m; ++a) {
        for (Eigen::Index b = a + 1; b < m; ++b) {
            const double r = pearson(cols[static_cast<std::size_t>(a)], cols[static_cast<std::size_t>(b)]);
            out.r(a, b) = r;
            out.r(b, a) = r;
        }
    }
    return out;
}

ResponseSurface response_surface(const TrainedModel& model, const PolymerTable& table,
                                 const std::string& feature_a, const std::string& feature_b,
                                 const ProcessInputs& fixed, int size_a, int size_b, Backend backend) {
    if (size_a < 2 || size_b < 2) throw Error(ErrorCode::invalid_argument, "surface grids need at least 2 points");
    const auto& kept = model.recipe.kept_features;
    auto column = [&](const std::string& name) {
        if (std::find(kept.begin(), kept.end(), name) == kept.end()) {
            throw Error(ErrorCode::missing_feature, "feature '" + name + "' is not used by the model");
        }
        const auto& all = model.recipe.all_features;
        return static_cast<Eigen::Index>(std::find(all.begin(), all.end(), name) - all.begin());
    };
    const Eigen::Index ca = column(feature_a);
    const Eigen::Index cb = column(feature_b);
    const RangeSummary range = range_of(table);
    auto axis = [&](const std::string& name, Eigen::Index col, int size) {
        double lo, hi;
        if (const FeatureRange* f = range.find(name)) {
            lo = f->min;
            hi = f->max;
        } else {
            lo = table.features.col(col).minCoeff();
            hi = table.features.col(col).maxCoeff();
        }
        return Vector::LinSpaced(size, lo, hi);
    };
    ResponseSurface s;
    s.feature_a = feature_a;
    s.feature_b = feature_b;
    s.fixed = fixed;
    s.axis_a = axis(feature_a, ca, size_a);
    s.axis_b = axis(feature_b, cb, size_b);
    const Vector base = feature_row(table, fixed);
    Matrix rows(static_cast<Eigen::Index>(size_a) * size_b, base.size());
    for (int i = 0; i < size_a; ++i) {
        for (int k = 0; k < size_b; ++k) {
            const Eigen::Index r = static_cast<Eigen::Index>(i) * size_b + k;
            rows.row(r) = base.transpose();
            rows(r, ca) = s.axis_a(i);
            rows(r, cb) = s.axis_b(k);
        }
    }
    const Vector pred = model.predict(rows, backend);
    s.prediction.resize(size_a, size_b);
    for (int i = 0; i < size_a; ++i) {
        for (int k = 0; k < size_b; ++k) s.prediction(i, k) = pred(static_cast<Eigen::Index>(i) * size_b + k);
    }
    return s;
}

}  // namespace fibredist
