#include "fibredist/forest.hpp"

#include <algorithm>
#include <numeric>

namespace fibredist {

Vector RandomForest::predict(const Matrix& x, Backend backend) const {
    Vector out(x.rows());
    parallel::for_each_index(backend, static_cast<std::size_t>(x.rows()), [&](std::size_t i) {
        const auto row = static_cast<Eigen::Index>(i);
        double sum = 0;
        for (const auto& tree : trees) sum += tree.predict_row(x, row);
        out(row) = sum / static_cast<double>(trees.size());
    });
    return out;
}

Vector RandomForest::predict_truncated(const Matrix& x, int min_node_size, Backend backend) const {
    Vector out(x.rows());
    const double limit = min_node_size;
    parallel::for_each_index(backend, static_cast<std::size_t>(x.rows()), [&](std::size_t i) {
        const auto row = static_cast<Eigen::Index>(i);
        double sum = 0;
        for (const auto& tree : trees) sum += tree.predict_row(x, row, limit);
        out(row) = sum / static_cast<double>(trees.size());
    });
    return out;
}

namespace {

// Presorted row orders shared by all trees of one forest.
struct SortedColumns {
    std::vector<std::vector<int>> order;  // per feature, rows by ascending value
};

SortedColumns presort(const Matrix& x) {
    SortedColumns s;
    s.order.resize(static_cast<std::size_t>(x.cols()));
    for (Eigen::Index f = 0; f < x.cols(); ++f) {
        auto& o = s.order[static_cast<std::size_t>(f)];
        o.resize(static_cast<std::size_t>(x.rows()));
        std::iota(o.begin(), o.end(), 0);
        std::stable_sort(o.begin(), o.end(), [&](int a, int b) { return x(a, f) < x(b, f); });
    }
    return s;
}

class ForestTreeBuilder {
public:
    ForestTreeBuilder(const Matrix& x, const Vector& y, const SortedColumns& sorted,
                      const ForestOptions& options, std::uint64_t seed)
        : x_(x), y_(y), options_(options), rng_(seed), node_seed_(derive_seed(seed, "forest.node")) {
        const auto n = static_cast<std::size_t>(x.rows());
        const auto p = static_cast<std::size_t>(x.cols());
        weight_.assign(n, 0.0);
        for (std::size_t draw = 0; draw < n; ++draw) weight_[uniform_index(rng_, n)] += 1.0;
        wy_.resize(n);
        for (std::size_t r = 0; r < n; ++r) wy_[r] = weight_[r] * y(static_cast<Eigen::Index>(r));
        lists_.resize(p);
        for (std::size_t f = 0; f < p; ++f) {
            lists_[f].reserve(n);
            for (int r : sorted.order[f]) {
                if (weight_[static_cast<std::size_t>(r)] > 0) lists_[f].push_back(r);
            }
        }
        scratch_.resize(lists_[0].size());
        goes_left_.assign(n, 0);
        features_.resize(p);
        candidates_.reserve(p);
        tree_.nodes.reserve(2 * lists_[0].size() + 1);
    }

    RegressionTree build() {
        tree_.importance = Vector::Zero(x_.cols());
        grow(0, lists_[0].size(), 1);
        return std::move(tree_);
    }

private:
    struct Split {
        int feature = -1;
        double threshold = 0;
        double gain = 0;
        std::size_t left_count = 0;  // distinct rows going left
    };

    int grow(std::size_t begin, std::size_t end, std::uint64_t key) {
        const int id = static_cast<int>(tree_.nodes.size());
        tree_.nodes.push_back({});
        double w = 0, s = 0, ss = 0;
        for (std::size_t i = begin; i < end; ++i) {
            const auto r = static_cast<std::size_t>(lists_[0][i]);
            w += weight_[r];
            s += wy_[r];
            ss += wy_[r] * y_(static_cast<Eigen::Index>(r));
        }
        const double mean = s / w;
        tree_.nodes[id].value = mean;
        tree_.nodes[id].weight = w;

        const double node_sse = ss - s * s / w;
        if (w <= options_.min_node_size || node_sse <= 1e-12 * (ss + 1.0)) return id;

        const Split best = best_split(begin, end, w, s, key);
        if (best.feature < 0) return id;

        // Stable partition of every feature list on the chosen split.
        for (std::size_t i = begin; i < end; ++i) {
            const int r = lists_[0][i];
            goes_left_[static_cast<std::size_t>(r)] = x_(r, best.feature) <= best.threshold;
        }
        for (auto& list : lists_) {
            std::size_t l = begin, k = 0;
            for (std::size_t i = begin; i < end; ++i) {
                const int r = list[i];
                const std::size_t left = goes_left_[static_cast<std::size_t>(r)];
                list[l] = r;
                scratch_[k] = r;
                l += left;
                k += 1 - left;
            }
            std::copy(scratch_.begin(), scratch_.begin() + static_cast<std::ptrdiff_t>(k),
                      list.begin() + static_cast<std::ptrdiff_t>(l));
        }
        const std::size_t mid = begin + best.left_count;

        tree_.importance(best.feature) += best.gain;
        tree_.nodes[id].feature = best.feature;
        tree_.nodes[id].threshold = best.threshold;
        const int left = grow(begin, mid, mix64(2 * key));
        const int right = grow(mid, end, mix64(2 * key + 1));
        tree_.nodes[id].left = left;
        tree_.nodes[id].right = right;
        return id;
    }

    Split best_split(std::size_t begin, std::size_t end, double w_total, double s_total, std::uint64_t key) {
        // Partial Fisher-Yates draw of mtry features, then ascending order so
        // equal gains resolve to the lowest feature index.
        const auto p = features_.size();
        const auto mtry = static_cast<std::size_t>(std::clamp(options_.mtry, 1, static_cast<int>(p)));
        std::iota(features_.begin(), features_.end(), 0);
        SplitMix64 rng(node_seed_ ^ key);
        for (std::size_t i = 0; i < mtry; ++i) {
            std::swap(features_[i], features_[i + uniform_index(rng, p - i)]);
        }
        candidates_.assign(features_.begin(), features_.begin() + static_cast<std::ptrdiff_t>(mtry));
        std::sort(candidates_.begin(), candidates_.end());

        // Gains are compared as fractions num / den to keep divisions out of the scan.
        Split best;
        double best_num = 0, best_den = 1;
        bool found = false;
        const double base = s_total * s_total / w_total;
        for (int f : candidates_) {
            const auto& list = lists_[static_cast<std::size_t>(f)];
            const double* col = x_.col(f).data();
            double wl = 0, sl = 0;
            double here = col[list[begin]];
            for (std::size_t i = begin; i + 1 < end; ++i) {
                const auto r = static_cast<std::size_t>(list[i]);
                wl += weight_[r];
                sl += wy_[r];
                const double next = col[list[i + 1]];
                if (here != next) {
                    const double wrt = w_total - wl;
                    const double srt = s_total - sl;
                    const double den = wl * wrt;
                    const double num = sl * sl * wrt + srt * srt * wl;
                    if (found ? num * best_den > best_num * den * (1.0 + 1e-12) : num > (base + 1e-12 * base) * den) {
                        found = true;
                        best_num = num;
                        best_den = den;
                        best.feature = f;
                        best.threshold = 0.5 * (here + next);
                        best.left_count = i + 1 - begin;
                    }
                }
                here = next;
            }
        }
        if (found) best.gain = best_num / best_den - base;
        if (!(best.gain > 0)) best.feature = -1;
        return best;
    }

    const Matrix& x_;
    const Vector& y_;
    const ForestOptions& options_;
    Rng rng_;
    std::uint64_t node_seed_;
    std::vector<double> weight_;
    std::vector<double> wy_;  // weight * y per row
    std::vector<std::vector<int>> lists_;
    std::vector<int> scratch_;
    std::vector<char> goes_left_;
    std::vector<int> features_;
    std::vector<int> candidates_;
    RegressionTree tree_;
};

}  // namespace

RandomForest fit_forest(const Matrix& x, const Vector& y, const ForestOptions& options) {
    if (x.rows() < 1 || y.size() != x.rows()) {
        throw Error(ErrorCode::invalid_argument, "forest needs matching non-empty x and y");
    }
    if (options.mtry < 1 || options.mtry > x.cols() || options.min_node_size < 1 || options.n_trees < 1) {
        throw Error(ErrorCode::invalid_argument, "forest needs 1 <= mtry <= p, min_node_size >= 1, n_trees >= 1");
    }
    const SortedColumns sorted = presort(x);
    RandomForest forest;
    forest.trees.resize(static_cast<std::size_t>(options.n_trees));
    parallel::for_each_index(options.backend, forest.trees.size(), [&](std::size_t t) {
        ForestTreeBuilder builder(x, y, sorted, options, derive_seed(options.seed, "forest.tree", t));
        forest.trees[t] = builder.build();
    });
    forest.importance = Vector::Zero(x.cols());
    for (const auto& tree : forest.trees) forest.importance += tree.importance;
    forest.importance /= static_cast<double>(forest.trees.size());
    return forest;
}

}  // namespace fibredist
