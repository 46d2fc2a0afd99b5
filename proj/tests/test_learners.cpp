#include <algorithm>
#include <numeric>

#include "doctest.h"
#include "fibredist/elastic_net.hpp"
#include "fibredist/forest.hpp"
#include "fibredist/knn.hpp"
#include "fibredist/linear.hpp"
#include "fibredist/mars.hpp"
#include "fibredist/model.hpp"
#include "fibredist/svr.hpp"
#include "fibredist/tree.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace fibredist;

using namespace oracle;

TEST_CASE("LINEAR matches the normal equations") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const Matrix x = random_matrix(50, 4, seed);
        const Vector y = random_target(x, seed + 100);
        const LinearFit fit = fit_linear(x, y);

        Matrix a(50, 5);
        a.col(0).setOnes();
        a.rightCols(4) = x;
        const Matrix ata = a.transpose() * a;
        const Vector beta = ata.ldlt().solve(a.transpose() * y);
        CHECK(std::abs(fit.intercept - beta(0)) < 1e-8);
        for (int j = 0; j < 4; ++j) CHECK(std::abs(fit.coef(j) - beta(j + 1)) < 1e-8);

        const double s2 = (y - a * beta).squaredNorm() / (50 - 5);
        const Matrix cov = s2 * ata.inverse();
        for (int j = 0; j < 4; ++j) {
            CHECK(fit.std_error(j) == doctest::Approx(std::sqrt(cov(j + 1, j + 1))).epsilon(1e-9));
            CHECK(fit.t_stat(j) == doctest::Approx(beta(j + 1) / std::sqrt(cov(j + 1, j + 1))).epsilon(1e-9));
        }
        CHECK(fit.intercept_std_error == doctest::Approx(std::sqrt(cov(0, 0))).epsilon(1e-9));
    }
}

TEST_CASE("LINEAR rank-deficient design falls back to minimum norm") {
    Matrix x = random_matrix(20, 3, 9);
    x.col(2) = x.col(0) * 2.0;
    const Vector y = random_target(x, 10);
    const LinearFit fit = fit_linear(x, y);
    CHECK(fit.rank_deficient);
    Matrix a(20, 4);
    a.col(0).setOnes();
    a.rightCols(3) = x;
    CHECK((fit.predict(x) - y).squaredNorm() == doctest::Approx(lstsq_rss(a, y)).epsilon(1e-9));
}

TEST_CASE("ELASTIC_NET satisfies KKT across the default grid") {
    const Matrix x = random_matrix(10, 3, 21);
    const Vector y = random_target(x, 22);
    const auto grid = default_grid(ModelKind::elastic_net, 3);
    CHECK(grid.size() == 125);
    double worst = 0;
    for (const auto& params : grid) {
        const auto& p = std::get<ElasticNetParams>(params);
        const double lambda = p.lambda_ratio * elastic_net_lambda_max(x, y, p.alpha);
        const ElasticNetFit fit = fit_elastic_net(x, y, p.alpha, lambda);
        worst = std::max(worst, elastic_net_kkt(x, y, fit.intercept, fit.coef, p.alpha, lambda));
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("ELASTIC_NET at lambda_max has all slopes zero") {
    const Matrix x = random_matrix(30, 4, 31);
    const Vector y = random_target(x, 32);
    for (double alpha : {0.25, 0.5, 1.0}) {
        const ElasticNetFit fit = fit_elastic_net(x, y, alpha, elastic_net_lambda_max(x, y, alpha) * (1 + 1e-9));
        CHECK(fit.coef.cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("KNN equals an exhaustive distance sort") {
    const Matrix x = random_matrix(300, 4, 41);
    const Vector y = random_target(x, 42);
    const Matrix q = random_matrix(200, 4, 43);
    for (int k : {1, 5, 11}) {
        const KnnModel model = fit_knn(x, y, k);
        const Vector pred = model.predict(q, Backend::serial);
        for (Eigen::Index i = 0; i < q.rows(); ++i) {
            const std::vector<int> expected = nearest(x, q.row(i), k);
            double mean = 0;
            for (int r : expected) mean += y(r);
            CHECK(model.neighbours(q.row(i)) == expected);
            CHECK(pred(i) == doctest::Approx(mean / k).epsilon(1e-12));
        }
    }
    CHECK_THROWS_AS_CODE(fit_knn(x, y, 0), ErrorCode::invalid_argument);
    CHECK_THROWS_AS_CODE(fit_knn(x, y, 301), ErrorCode::invalid_argument);
}

TEST_CASE("TREE splits match an exhaustive scan at every node") {
    const Matrix x = random_matrix(120, 3, 51);
    const Vector y = random_target(x, 52);
    TreeOptions options;
    options.cp = 0.001;
    const RegressionTree tree = fit_tree(x, y, options);
    REQUIRE(tree.nodes.size() > 3);

    // rows reaching each node
    std::vector<std::vector<int>> reach(tree.nodes.size());
    reach[0].resize(120);
    std::iota(reach[0].begin(), reach[0].end(), 0);
    const double root = sse(y, reach[0]);
    int checked = 0;
    for (std::size_t id = 0; id < tree.nodes.size(); ++id) {
        const auto& node = tree.nodes[id];
        const auto& rows = reach[id];
        SplitScan scan;
        if (static_cast<int>(rows.size()) >= options.min_split) scan = best_split(x, y, rows, options.min_leaf);
        const double best = scan.best, second = scan.second;
        const int best_f = scan.feature;
        const double best_t = scan.threshold;
        const double parent = sse(y, rows);
        const bool oracle_splits = best_f >= 0 && (parent - best) / root >= options.cp * (1 + 1e-9);
        if (node.feature < 0) {
            CHECK_FALSE(oracle_splits);
            continue;
        }
        REQUIRE(best_f >= 0);
        ++checked;
        if (second - best > 1e-9 * parent) {
            CHECK(node.feature == best_f);
            CHECK(node.threshold == best_t);
        }
        std::vector<int> l, r;
        for (int row : rows) (x(row, node.feature) <= node.threshold ? l : r).push_back(row);
        CHECK(sse(y, l) + sse(y, r) == doctest::Approx(best).epsilon(1e-10));
        reach[static_cast<std::size_t>(node.left)] = l;
        reach[static_cast<std::size_t>(node.right)] = r;
    }
    CHECK(checked >= 2);
}

TEST_CASE("MARS forward knots match an exhaustive least-squares scan") {
    const Matrix x = random_matrix(60, 2, 61);
    Vector y(60);
    for (Eigen::Index i = 0; i < 60; ++i) y(i) = std::max(0.0, x(i, 0) - 0.3) * 3 + std::abs(x(i, 1)) + 0.05 * std::sin(7.0 * i);

    MarsOptions options;
    options.max_terms = 5;
    options.min_gain = 0;
    const MarsForward fwd = mars_forward(x, y, options);
    REQUIRE(fwd.terms.size() >= 5);

    Matrix basis = Matrix::Ones(60, 1);
    for (int step = 0; step < 2; ++step) {
        const KnotScan scan = best_hinge_pair(x, y, basis);
        const int best_var = scan.var;
        const double best_knot = scan.knot;
        const auto& plus = fwd.terms[static_cast<std::size_t>(1 + 2 * step)];
        const auto& minus = fwd.terms[static_cast<std::size_t>(2 + 2 * step)];
        REQUIRE(plus.size() == 1);
        CHECK(plus[0].var == best_var);
        CHECK(plus[0].knot == best_knot);
        CHECK(plus[0].direction == 1);
        CHECK(minus[0].knot == best_knot);
        CHECK(minus[0].direction == -1);
        basis.conservativeResize(Eigen::NoChange, basis.cols() + 2);
        basis.col(basis.cols() - 2) = fwd.basis.col(1 + 2 * step);
        basis.col(basis.cols() - 1) = fwd.basis.col(2 + 2 * step);
    }
}

TEST_CASE("MARS pruning picks the lowest GCV subset on the backward path") {
    const Matrix x = random_matrix(80, 3, 71);
    const Vector y = random_target(x, 72);
    MarsOptions options;
    options.max_terms = 11;
    const MarsForward fwd = mars_forward(x, y, options);
    const MarsModel model = mars_prune(fwd, y, 30);
    const Vector pred = model.predict(x);
    const double rss = (y - pred).squaredNorm();
    CHECK(model.rss == doctest::Approx(rss).epsilon(1e-9));
    const double c = mars_effective_params(static_cast<int>(model.terms.size()), 1);
    CHECK(model.gcv == doctest::Approx(rss / 80 / ((1 - c / 80) * (1 - c / 80))).epsilon(1e-9));
    // the selected subset can't be beaten by the full forward model's GCV
    const double full_rss = lstsq_rss(fwd.basis, y);
    const double cf = mars_effective_params(static_cast<int>(fwd.terms.size()), 1);
    CHECK(model.gcv <= full_rss / 80 / ((1 - cf / 80) * (1 - cf / 80)) * (1 + 1e-9));
    CHECK(mars_prune(fwd, y, 3).terms.size() <= 3);
    CHECK(mars_effective_params(5, 1) == 9.0);
    CHECK(mars_effective_params(5, 2) == 11.0);
}


TEST_CASE("SVR dual objective matches a dense QP oracle on 8 points") {
    for (std::uint64_t seed = 81; seed <= 84; ++seed) {
        Rng rng(seed);
        Matrix x(8, 2);
        Vector y(8);
        for (int i = 0; i < 8; ++i) {
            x(i, 0) = uniform01(rng);
            x(i, 1) = uniform01(rng);
            y(i) = std::sin(3 * x(i, 0)) + x(i, 1);
        }
        SvrOptions options;
        options.sigma = 1.5;
        options.cost = 1.0;
        options.epsilon = 0.1;
        options.standardize_target = false;
        const SvrFit fit = fit_svr(x, y, options);
        Matrix k(8, 8);
        for (int i = 0; i < 8; ++i)
            for (int j = 0; j < 8; ++j) k(i, j) = rbf_kernel(x.row(i), x.row(j), options.sigma);
        CHECK(std::abs(fit.dual_objective - svr_dual(k, y, options.cost, options.epsilon)) < 1e-3);
        // box and equality constraints on beta
        CHECK(fit.coef.cwiseAbs().maxCoeff() <= options.cost + 1e-12);
        CHECK(std::abs(fit.coef.sum()) < 1e-9);
    }
}

TEST_CASE("SVR respects the epsilon tube for a perfectly fittable target") {
    Matrix x(6, 1);
    x << 0, 1, 2, 3, 4, 5;
    const Vector y = Vector::Constant(6, 2.0);
    SvrOptions options;
    options.standardize_target = false;
    const SvrFit fit = fit_svr(x, y, options);
    CHECK(fit.coef.size() == 0);
    CHECK((fit.predict(x).array() - 2.0).abs().maxCoeff() <= options.epsilon + 1e-12);
}

TEST_CASE("estimate_sigma is the median inverse squared distance") {
    Matrix x(4, 1);
    x << 0, 1, 3, 3;
    // pair distances^2: 1, 9, 9, 4, 4, (0 skipped) -> inverse: 1, 1/9, 1/9, 1/4, 1/4 -> median 1/4
    CHECK(estimate_sigma(x, 1) == 0.25);
    CHECK_THROWS_AS_CODE(estimate_sigma(Matrix::Zero(3, 2), 1), ErrorCode::degenerate_data);
}

TEST_CASE("FOREST truncation reproduces a larger node size exactly") {
    const Matrix x = random_matrix(150, 4, 91);
    const Vector y = random_target(x, 92);
    ForestOptions small;
    small.mtry = 2;
    small.min_node_size = 1;
    small.n_trees = 60;
    const RandomForest deep = fit_forest(x, y, small);
    for (int node_size : {5, 10}) {
        ForestOptions big = small;
        big.min_node_size = node_size;
        const RandomForest shallow = fit_forest(x, y, big);
        const Vector a = shallow.predict(x, Backend::serial);
        const Vector b = deep.predict_truncated(x, node_size, Backend::serial);
        CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("FOREST is seed deterministic and validates options") {
    const Matrix x = random_matrix(80, 3, 95);
    const Vector y = random_target(x, 96);
    ForestOptions o;
    o.mtry = 2;
    o.n_trees = 20;
    const Vector a = fit_forest(x, y, o).predict(x, Backend::serial);
    const Vector b = fit_forest(x, y, o).predict(x, Backend::serial);
    CHECK(a == b);
    o.seed = 7;
    CHECK(fit_forest(x, y, o).predict(x, Backend::serial) != a);
    o.mtry = 4;
    CHECK_THROWS_AS_CODE(fit_forest(x, y, o), ErrorCode::invalid_argument);
}

TEST_CASE("every learner survives serialization bit-exactly") {
    const auto records = generate_synthetic({}).records;
    PolymerTable t = polymer_subset(records, "SYN");
    IndexList rows(150);
    std::iota(rows.begin(), rows.end(), 0);
    t = t.take_rows(rows);
    for (ModelKind kind : kAllModelKinds) {
        const auto grid = default_grid(kind, static_cast<int>(t.cols()));
        const HyperParams params = grid[grid.size() / 2];
        const TrainedModel model = train_model(t.features, t.target, t.feature_names, params);
        const TrainedModel back = deserialize_model(serialize_model(model));
        CAPTURE(to_string(kind));
        CHECK(back.kind == kind);
        CHECK(back.recipe == model.recipe);
        CHECK(describe(back.params) == describe(model.params));
        CHECK(back.predict(t.features, Backend::serial) == model.predict(t.features, Backend::serial));
    }
    CHECK_THROWS_AS_CODE(deserialize_model("{\"format\":\"other\"}"), ErrorCode::invalid_argument);
}

TEST_CASE("model kind names") {
    for (ModelKind kind : kAllModelKinds) CHECK(parse_model_kind(to_string(kind)) == kind);
    CHECK(parse_model_kind("svr") == ModelKind::svr_rbf);
    CHECK(parse_model_kind("rf") == ModelKind::forest);
    CHECK_THROWS_AS_CODE(parse_model_kind("gbm"), ErrorCode::invalid_argument);
    CHECK(kAllModelKinds.size() == 7);
}
