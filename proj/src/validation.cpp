#include "fibredist/validation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

namespace fibredist {

namespace {

Matrix take(const Matrix& x, const IndexList& rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(rows[i]);
    return out;
}

Vector take(const Vector& y, const IndexList& rows) {
    Vector out(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) out(static_cast<Eigen::Index>(i)) = y(rows[i]);
    return out;
}

double rmse_of(const Vector& y, const Vector& yhat) {
    return std::sqrt((y - yhat).squaredNorm() / static_cast<double>(y.size()));
}

Split complement_split(const IndexList& all, const std::vector<char>& in_test) {
    Split s;
    for (std::size_t i = 0; i < all.size(); ++i) (in_test[i] ? s.test : s.train).push_back(all[i]);
    return s;
}

// Standardised training/validation matrices for one split.
struct PreparedSplit {
    NormalizationRecipe recipe;
    Matrix z_train;
    Matrix z_test;
    Vector y_train;
    Vector y_test;
};

PreparedSplit prepare(const Matrix& x, const Vector& y, const std::vector<std::string>& names,
                      const Split& split) {
    PreparedSplit p;
    const Matrix train = take(x, split.train);
    p.recipe = fit_recipe(train, names);
    p.z_train = apply_recipe(p.recipe, train);
    p.z_test = apply_recipe(p.recipe, take(x, split.test));
    p.y_train = take(y, split.train);
    p.y_test = take(y, split.test);
    return p;
}

}  // namespace

std::vector<Split> make_inner_splits(const IndexList& rows, std::uint64_t seed, const InnerScheme& scheme,
                                     std::vector<std::string>* warnings) {
    IndexList sorted = rows;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    std::vector<Split> splits;
    if (n < 2) throw Error(ErrorCode::insufficient_studies, "inner resampling needs at least 2 rows");
    if (n < 10) {
        if (warnings) {
            warnings->push_back("only " + std::to_string(n) +
                                " training rows; inner tuning uses leave-one-out instead of repeated k-fold");
        }
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<char> in_test(n, 0);
            in_test[i] = 1;
            splits.push_back(complement_split(sorted, in_test));
        }
        return splits;
    }
    const auto folds = static_cast<std::size_t>(std::max(2, scheme.folds));
    for (int r = 0; r < scheme.repeats; ++r) {
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        Rng rng(derive_seed(seed, "cv.inner.repeat", static_cast<std::uint64_t>(r)));
        shuffle_in_place(perm, rng);
        std::vector<std::size_t> fold_of(n);
        for (std::size_t i = 0; i < n; ++i) fold_of[perm[i]] = i % folds;
        for (std::size_t f = 0; f < folds; ++f) {
            std::vector<char> in_test(n);
            for (std::size_t i = 0; i < n; ++i) in_test[i] = fold_of[i] == f;
            splits.push_back(complement_split(sorted, in_test));
        }
    }
    return splits;
}

FoldPlan make_folds(const std::vector<int>& study_ids, std::uint64_t seed, const InnerScheme& scheme) {
    std::map<int, IndexList> groups;
    for (std::size_t i = 0; i < study_ids.size(); ++i) groups[study_ids[i]].push_back(static_cast<int>(i));
    if (groups.size() < 2) {
        throw Error(ErrorCode::insufficient_studies,
                    "leave-one-study-out needs at least 2 distinct studies; found " + std::to_string(groups.size()));
    }
    FoldPlan plan;
    plan.seed = seed;
    IndexList all(study_ids.size());
    std::iota(all.begin(), all.end(), 0);
    std::size_t f = 0;
    for (const auto& [study, rows] : groups) {
        std::vector<char> in_test(all.size(), 0);
        for (int r : rows) in_test[static_cast<std::size_t>(r)] = 1;
        plan.outer.push_back(complement_split(all, in_test));
        plan.outer_labels.push_back("study " + std::to_string(study));
        plan.inner.push_back(
            make_inner_splits(plan.outer.back().train, derive_seed(seed, "cv.outer", f), scheme, &plan.warnings));
        ++f;
    }
    return plan;
}

FoldPlan make_shuffled_folds(std::size_t n, int k, std::uint64_t seed, const InnerScheme& scheme) {
    if (k < 2 || n < static_cast<std::size_t>(k)) {
        throw Error(ErrorCode::invalid_argument, "shuffled folds need 2 <= k <= n");
    }
    FoldPlan plan;
    plan.seed = seed;
    IndexList all(n);
    std::iota(all.begin(), all.end(), 0);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(derive_seed(seed, "cv.shuffled"));
    shuffle_in_place(perm, rng);
    for (int f = 0; f < k; ++f) {
        std::vector<char> in_test(n, 0);
        for (std::size_t i = 0; i < n; ++i) {
            if (i % static_cast<std::size_t>(k) == static_cast<std::size_t>(f)) in_test[perm[i]] = 1;
        }
        plan.outer.push_back(complement_split(all, in_test));
        plan.outer_labels.push_back("fold " + std::to_string(f + 1));
        plan.inner.push_back(make_inner_splits(plan.outer.back().train,
                                               derive_seed(seed, "cv.outer", static_cast<std::uint64_t>(f)),
                                               scheme, &plan.warnings));
    }
    return plan;
}

Metrics compute_metrics(const Vector& y, const Vector& yhat) {
    if (y.size() != yhat.size()) throw Error(ErrorCode::invalid_argument, "metrics: length mismatch");
    if (y.size() == 0) throw Error(ErrorCode::invalid_argument, "metrics: empty input");
    Metrics m;
    m.n = static_cast<std::size_t>(y.size());
    const double n = static_cast<double>(y.size());
    const Vector e = y - yhat;
    const double sse = e.squaredNorm();
    m.rmse = std::sqrt(sse / n);
    m.mae = e.cwiseAbs().sum() / n;
    const double sst = (y.array() - y.mean()).square().sum();
    if (sst > 0) m.r2 = 1.0 - sse / sst;
    return m;
}

MetricsSummary summarize(const std::vector<Metrics>& folds) {
    auto stat = [](const std::vector<double>& v) {
        MetricStat s;
        s.count = v.size();
        if (v.empty()) {
            s.mean = s.sd = std::numeric_limits<double>::quiet_NaN();
            return s;
        }
        double sum = 0;
        for (double x : v) sum += x;
        s.mean = sum / static_cast<double>(v.size());
        if (v.size() > 1) {
            double ss = 0;
            for (double x : v) ss += (x - s.mean) * (x - s.mean);
            s.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
        }
        return s;
    };
    std::vector<double> r2, rmse, mae;
    MetricsSummary out;
    out.folds = folds.size();
    for (const auto& m : folds) {
        if (m.r2) r2.push_back(*m.r2); else ++out.r2_missing;
        rmse.push_back(m.rmse);
        mae.push_back(m.mae);
    }
    out.r2 = stat(r2);
    out.rmse = stat(rmse);
    out.mae = stat(mae);
    return out;
}

TuneResult tune(const Matrix& x, const Vector& y, const std::vector<std::string>& names,
                const std::vector<Split>& splits, const std::vector<HyperParams>& grid,
                const TuneOptions& options) {
    if (grid.empty()) throw Error(ErrorCode::invalid_argument, "tuning grid is empty");
    TuneResult result;
    {
        const NormalizationRecipe recipe = fit_recipe(x, names);
        const Matrix z = apply_recipe(recipe, x);
        for (const auto& g : grid) result.grid.push_back(resolve_params(g, z, y, derive_seed(options.seed, "tune.resolve")));
    }
    const std::size_t n_grid = grid.size();
    result.mean_rmse.assign(n_grid, std::numeric_limits<double>::infinity());
    if (n_grid == 1) {
        result.best = 0;
        result.params = result.grid[0];
        return result;
    }
    if (splits.empty()) throw Error(ErrorCode::invalid_argument, "tuning needs at least one split");

    const std::size_t n_split = splits.size();
    std::vector<double> rmse(n_grid * n_split, std::numeric_limits<double>::infinity());
    const bool all_mars = std::all_of(result.grid.begin(), result.grid.end(),
                                      [](const HyperParams& h) { return std::holds_alternative<MarsParams>(h); });
    const bool all_forest = std::all_of(result.grid.begin(), result.grid.end(),
                                        [](const HyperParams& h) { return std::holds_alternative<ForestParams>(h); });
    TrainOptions train;
    train.backend = Backend::serial;
    if (all_mars) {
        // one forward pass per (degree, split), pruned for every nprune
        std::vector<int> degrees;
        for (const auto& g : result.grid) {
            const int d = std::get<MarsParams>(g).degree;
            if (std::find(degrees.begin(), degrees.end(), d) == degrees.end()) degrees.push_back(d);
        }
        parallel::for_each_index(options.backend, degrees.size() * n_split, [&](std::size_t task) {
            const int degree = degrees[task / n_split];
            const std::size_t s = task % n_split;
            const PreparedSplit p = prepare(x, y, names, splits[s]);
            MarsOptions mo;
            mo.degree = degree;
            MarsForward fwd;
            try {
                fwd = mars_forward(p.z_train, p.y_train, mo);
            } catch (const Error&) {
                return;
            }
            for (std::size_t g = 0; g < n_grid; ++g) {
                const auto& mp = std::get<MarsParams>(result.grid[g]);
                if (mp.degree != degree) continue;
                try {
                    const MarsModel m = mars_prune(fwd, p.y_train, mp.nprune);
                    const double e = rmse_of(p.y_test, m.predict(p.z_test));
                    if (std::isfinite(e)) rmse[g * n_split + s] = e;
                } catch (const Error&) {
                }
            }
        });
    } else if (all_forest) {
        // Forests differing only in min_node_size share their trees: grow once
        // at the smallest size and read the others off by truncation.
        std::vector<std::size_t> leaders;  // first grid index of each (mtry, n_trees) group
        std::vector<std::size_t> group_of(n_grid);
        for (std::size_t g = 0; g < n_grid; ++g) {
            const auto& fp = std::get<ForestParams>(result.grid[g]);
            std::size_t l = 0;
            for (; l < leaders.size(); ++l) {
                const auto& lp = std::get<ForestParams>(result.grid[leaders[l]]);
                if (lp.mtry == fp.mtry && lp.n_trees == fp.n_trees) break;
            }
            if (l == leaders.size()) leaders.push_back(g);
            group_of[g] = l;
        }
        std::vector<PreparedSplit> prepared(n_split);
        parallel::for_each_index(options.backend, n_split,
                                 [&](std::size_t s) { prepared[s] = prepare(x, y, names, splits[s]); });
        parallel::for_each_index(options.backend, leaders.size() * n_split, [&](std::size_t task) {
            const std::size_t l = task / n_split;
            const std::size_t s = task % n_split;
            const PreparedSplit& p = prepared[s];
            ForestParams grow = std::get<ForestParams>(result.grid[leaders[l]]);
            for (std::size_t g = 0; g < n_grid; ++g) {
                if (group_of[g] == l) {
                    grow.min_node_size = std::min(grow.min_node_size, std::get<ForestParams>(result.grid[g]).min_node_size);
                }
            }
            TrainOptions local = train;
            local.seed = derive_seed(options.seed, "tune.fit", s);
            try {
                const TrainedModel m = train_standardized(p.recipe, p.z_train, p.y_train, grow, local);
                const auto& forest = std::get<RandomForest>(m.state);
                for (std::size_t g = 0; g < n_grid; ++g) {
                    if (group_of[g] != l) continue;
                    const int size = std::get<ForestParams>(result.grid[g]).min_node_size;
                    const double e = rmse_of(p.y_test, forest.predict_truncated(p.z_test, size, Backend::serial));
                    if (std::isfinite(e)) rmse[g * n_split + s] = e;
                }
            } catch (const Error&) {
            }
        });
    } else {
        std::vector<PreparedSplit> prepared(n_split);
        parallel::for_each_index(options.backend, n_split,
                                 [&](std::size_t s) { prepared[s] = prepare(x, y, names, splits[s]); });
        parallel::for_each_index(options.backend, n_grid * n_split, [&](std::size_t task) {
            const std::size_t g = task / n_split;
            const std::size_t s = task % n_split;
            const PreparedSplit& p = prepared[s];
            TrainOptions local = train;
            local.seed = derive_seed(options.seed, "tune.fit", s);
            try {
                const TrainedModel m = train_standardized(p.recipe, p.z_train, p.y_train, result.grid[g], local);
                const double e = rmse_of(p.y_test, m.predict_standardized(p.z_test, Backend::serial));
                if (std::isfinite(e)) rmse[task] = e;
            } catch (const Error&) {
            }
        });
    }
    for (std::size_t g = 0; g < n_grid; ++g) {
        double sum = 0;
        for (std::size_t s = 0; s < n_split; ++s) sum += rmse[g * n_split + s];
        result.mean_rmse[g] = sum / static_cast<double>(n_split);
    }
    std::size_t best = 0;
    for (std::size_t g = 1; g < n_grid; ++g) {
        if (result.mean_rmse[g] < result.mean_rmse[best]) best = g;
    }
    if (!std::isfinite(result.mean_rmse[best])) {
        throw Error(ErrorCode::degenerate_data, "every grid point failed to fit during tuning");
    }
    result.best = best;
    result.params = result.grid[best];
    return result;
}

CVResult nested_cv(const PolymerTable& table, ModelKind kind, const CVOptions& options) {
    const FoldPlan plan =
        options.scheme == OuterScheme::leave_one_study_out
            ? make_folds(table.study, options.seed, options.inner)
            : make_shuffled_folds(table.rows(), options.shuffled_folds, options.seed, options.inner);
    return nested_cv(table, plan, kind, options);
}

CVResult nested_cv(const PolymerTable& table, const FoldPlan& plan, ModelKind kind, const CVOptions& options) {
    const std::vector<HyperParams> grid =
        options.grid ? *options.grid : default_grid(kind, static_cast<int>(table.cols()));
    CVResult result;
    result.kind = kind;
    result.warnings = plan.warnings;
    const std::size_t k = plan.outer.size();
    result.folds.resize(k);
    parallel::for_each_index(options.backend, k, [&](std::size_t f) {
        const Split& outer = plan.outer[f];
        FoldResult& fr = result.folds[f];
        fr.fold = static_cast<int>(f);
        fr.label = plan.outer_labels[f];
        fr.test_rows = outer.test;
        try {
            // inner split indices are table rows; map them to outer-train positions
            std::vector<int> pos(table.rows(), -1);
            for (std::size_t i = 0; i < outer.train.size(); ++i) {
                pos[static_cast<std::size_t>(outer.train[i])] = static_cast<int>(i);
            }
            std::vector<Split> local;
            for (const Split& s : plan.inner[f]) {
                Split l;
                for (int r : s.train) l.train.push_back(pos[static_cast<std::size_t>(r)]);
                for (int r : s.test) l.test.push_back(pos[static_cast<std::size_t>(r)]);
                local.push_back(std::move(l));
            }
            const Matrix x_train = take(table.features, outer.train);
            const Vector y_train = take(table.target, outer.train);
            TuneOptions to;
            to.seed = derive_seed(options.seed, "cv.tune", f);
            to.backend = Backend::serial;
            const TuneResult tuned = tune(x_train, y_train, table.feature_names, local, grid, to);
            fr.selected = tuned.params;
            TrainOptions tr;
            tr.seed = derive_seed(options.seed, "cv.refit", f);
            tr.backend = Backend::serial;
            const TrainedModel model = train_model(x_train, y_train, table.feature_names, tuned.params, tr);
            fr.predictions = model.predict(take(table.features, outer.test), Backend::serial);
            fr.metrics = compute_metrics(take(table.target, outer.test), fr.predictions);
        } catch (const Error& e) {
            throw Error(e.code(), "outer fold " + std::to_string(f + 1) + " (" + fr.label + "): " + e.what());
        }
    });
    result.oof = Vector::Constant(static_cast<Eigen::Index>(table.rows()), std::numeric_limits<double>::quiet_NaN());
    result.fold_of_row.assign(table.rows(), -1);
    std::vector<Metrics> fold_metrics;
    for (const auto& fr : result.folds) {
        for (std::size_t i = 0; i < fr.test_rows.size(); ++i) {
            result.oof(fr.test_rows[i]) = fr.predictions(static_cast<Eigen::Index>(i));
            result.fold_of_row[static_cast<std::size_t>(fr.test_rows[i])] = fr.fold;
        }
        fold_metrics.push_back(fr.metrics);
    }
    result.summary = summarize(fold_metrics);
    result.pooled = compute_metrics(table.target, result.oof);
    return result;
}

FinalFit final_fit(const PolymerTable& table, ModelKind kind, const CVOptions& options) {
    if (table.rows() == 0) throw Error(ErrorCode::invalid_argument, "final fit needs a nonempty table");
    const std::vector<HyperParams> grid =
        options.grid ? *options.grid : default_grid(kind, static_cast<int>(table.cols()));
    IndexList all(table.rows());
    std::iota(all.begin(), all.end(), 0);
    FinalFit out;
    const auto splits = grid.size() > 1 ? make_inner_splits(all, derive_seed(options.seed, "cv.final"), options.inner)
                                        : std::vector<Split>{};
    TuneOptions to;
    to.seed = derive_seed(options.seed, "cv.final.tune");
    to.backend = options.backend;
    out.tuning = tune(table.features, table.target, table.feature_names, splits, grid, to);
    TrainOptions tr;
    tr.seed = derive_seed(options.seed, "cv.final.refit");
    tr.backend = options.backend;
    out.model = train_model(table.features, table.target, table.feature_names, out.tuning.params, tr);
    return out;
}

std::vector<BenchmarkCell> benchmark(const std::vector<StudyRecord>& records,
                                     const std::vector<std::string>& polymers,
                                     const std::vector<ModelKind>& kinds, const CVOptions& options) {
    std::vector<BenchmarkCell> cells;
    for (const auto& polymer : polymers) {
        std::optional<PolymerTable> table;
        std::string table_error;
        try {
            table = polymer_subset(records, polymer);
        } catch (const Error& e) {
            table_error = e.what();
        }
        for (ModelKind kind : kinds) {
            BenchmarkCell cell;
            cell.polymer = polymer;
            cell.kind = kind;
            if (!table) {
                cell.error = table_error;
            } else {
                try {
                    cell.summary = nested_cv(*table, kind, options).summary;
                } catch (const Error& e) {
                    cell.error = e.what();
                }
            }
            cells.push_back(std::move(cell));
        }
    }
    return cells;
}

std::string format_mean_sd(const MetricStat& stat, int decimals) {
    if (stat.count == 0 || !std::isfinite(stat.mean)) return "NA";
    char buf[96];
    std::snprintf(buf, sizeof buf, "%.*f ± %.*f", decimals, stat.mean, decimals, stat.sd);
    return buf;
}

std::string render_benchmark(const std::vector<BenchmarkCell>& cells) {
    std::vector<std::array<std::string, 5>> rows;
    rows.push_back({"Polymer", "Model", "RMSE", "MAE", "Rsquared"});
    for (const auto& c : cells) {
        if (!c.error.empty()) {
            rows.push_back({c.polymer, std::string(to_string(c.kind)), "error", "error", "error"});
            continue;
        }
        rows.push_back({c.polymer, std::string(to_string(c.kind)), format_mean_sd(c.summary.rmse, 2),
                        format_mean_sd(c.summary.mae, 2), format_mean_sd(c.summary.r2, 3)});
    }
    // column widths in code points ("±" is two bytes)
    auto width = [](const std::string& s) {
        std::size_t w = 0;
        for (unsigned char ch : s) w += (ch & 0xC0) != 0x80;
        return w;
    };
    std::array<std::size_t, 5> w{};
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < 5; ++i) w[i] = std::max(w[i], width(r[i]));
    }
    std::ostringstream out;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t i = 0; i < 5; ++i) {
            out << rows[r][i];
            if (i + 1 < 5) out << std::string(w[i] - width(rows[r][i]) + 2, ' ');
        }
        out << '\n';
    }
    for (const auto& c : cells) {
        if (!c.error.empty()) out << "# " << c.polymer << " / " << to_string(c.kind) << ": " << c.error << '\n';
    }
    return out.str();
}

}  // namespace fibredist
