#include "fibredist/tree.hpp"

#include <algorithm>
#include <numeric>

namespace fibredist {

double RegressionTree::predict_row(const Matrix& x, Eigen::Index row) const {
    int at = 0;
    while (nodes[at].feature >= 0) {
        const auto& node = nodes[at];
        at = x(row, node.feature) <= node.threshold ? node.left : node.right;
    }
    return nodes[at].value;
}

double RegressionTree::predict_row(const Matrix& x, Eigen::Index row, double min_split_weight) const {
    int at = 0;
    while (nodes[at].feature >= 0 && nodes[at].weight > min_split_weight) {
        const auto& node = nodes[at];
        at = x(row, node.feature) <= node.threshold ? node.left : node.right;
    }
    return nodes[at].value;
}

Vector RegressionTree::predict(const Matrix& x) const {
    Vector out(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) out(i) = predict_row(x, i);
    return out;
}

std::size_t RegressionTree::leaf_count() const {
    return static_cast<std::size_t>(
        std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.feature < 0; }));
}

namespace {

struct SplitChoice {
    int feature = -1;
    double threshold = 0;
    double gain = 0;
};

class TreeBuilder {
public:
    TreeBuilder(const Matrix& x, const Vector& y, const TreeOptions& options)
        : x_(x), y_(y), options_(options) {}

    RegressionTree build() {
        tree_.importance = Vector::Zero(x_.cols());
        std::vector<int> rows(static_cast<std::size_t>(x_.rows()));
        std::iota(rows.begin(), rows.end(), 0);
        const double mean = y_.mean();
        root_ss_ = (y_.array() - mean).square().sum();
        grow(rows, 0);
        return std::move(tree_);
    }

private:
    int grow(std::vector<int>& rows, int depth) {
        const int id = static_cast<int>(tree_.nodes.size());
        tree_.nodes.push_back({});
        double sum = 0;
        for (int r : rows) sum += y_(r);
        tree_.nodes[id].value = sum / static_cast<double>(rows.size());
        tree_.nodes[id].weight = static_cast<double>(rows.size());

        if (static_cast<int>(rows.size()) < options_.min_split || depth >= options_.max_depth ||
            root_ss_ <= 0) {
            return id;
        }
        const SplitChoice best = best_split(rows);
        if (best.feature < 0 || best.gain / root_ss_ < options_.cp) return id;

        std::vector<int> left, right;
        for (int r : rows) {
            (x_(r, best.feature) <= best.threshold ? left : right).push_back(r);
        }
        rows.clear();
        rows.shrink_to_fit();
        tree_.importance(best.feature) += best.gain;
        tree_.nodes[id].feature = best.feature;
        tree_.nodes[id].threshold = best.threshold;
        const int l = grow(left, depth + 1);
        const int r = grow(right, depth + 1);
        tree_.nodes[id].left = l;
        tree_.nodes[id].right = r;
        return id;
    }

    SplitChoice best_split(const std::vector<int>& rows) const {
        SplitChoice best;
        const auto m = rows.size();
        double total = 0;
        for (int r : rows) total += y_(r);
        const double base = total * total / static_cast<double>(m);
        std::vector<int> order(rows);
        for (Eigen::Index f = 0; f < x_.cols(); ++f) {
            std::sort(order.begin(), order.end(), [&](int a, int b) {
                const double xa = x_(a, f), xb = x_(b, f);
                return xa < xb || (xa == xb && a < b);
            });
            double left_sum = 0;
            for (std::size_t i = 0; i + 1 < m; ++i) {
                left_sum += y_(order[i]);
                const std::size_t n_left = i + 1;
                const std::size_t n_right = m - n_left;
                const double here = x_(order[i], f);
                const double next = x_(order[i + 1], f);
                if (here == next) continue;
                if (static_cast<int>(n_left) < options_.min_leaf ||
                    static_cast<int>(n_right) < options_.min_leaf) {
                    continue;
                }
                const double right_sum = total - left_sum;
                const double gain = left_sum * left_sum / static_cast<double>(n_left) +
                                    right_sum * right_sum / static_cast<double>(n_right) - base;
                if (gain > best.gain) {
                    best.gain = gain;
                    best.feature = static_cast<int>(f);
                    best.threshold = 0.5 * (here + next);
                }
            }
        }
        return best;
    }

    const Matrix& x_;
    const Vector& y_;
    TreeOptions options_;
    RegressionTree tree_;
    double root_ss_ = 0;
};

}  // namespace

RegressionTree fit_tree(const Matrix& x, const Vector& y, const TreeOptions& options) {
    if (x.rows() < 1 || y.size() != x.rows()) {
        throw Error(ErrorCode::invalid_argument, "tree needs matching non-empty x and y");
    }
    return TreeBuilder(x, y, options).build();
}

}  // namespace fibredist
