#include <numeric>

#include "doctest.h"
#include "fibredist/interpret.hpp"
#include "fibredist/linear.hpp"
#include "helpers.hpp"

using namespace fibredist;

namespace {

struct Toy {
    Matrix x;
    Vector y;
    std::vector<std::string> names{"signal", "noise", "weak"};
};

Toy toy(Eigen::Index n = 200) {
    Rng rng(5);
    Toy t;
    t.x.resize(n, 3);
    t.y.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        t.x(i, 0) = uniform01(rng) * 10;
        t.x(i, 1) = uniform01(rng) * 10;
        t.x(i, 2) = uniform01(rng) * 10;
        t.y(i) = 30 * t.x(i, 0) + 2 * t.x(i, 2) + standard_normal(rng);
    }
    return t;
}

PolymerTable as_table(const Toy& t) {
    PolymerTable table;
    table.features = t.x;
    table.target = t.y;
    table.feature_names = t.names;
    table.study.assign(static_cast<std::size_t>(t.y.size()), 0);
    return table;
}

}  // namespace

TEST_CASE("scale_importance") {
    CHECK(scale_importance({2, 4, 6}) == std::vector<double>{0, 50, 100});
    CHECK(scale_importance({3, 3}) == std::vector<double>{100, 100});
    CHECK(scale_importance({0, 0}) == std::vector<double>{0, 0});
    CHECK(scale_importance({}).empty());
}

TEST_CASE("sample_rows") {
    CHECK(sample_rows(5, 10, 1, "x") == IndexList{0, 1, 2, 3, 4});
    const IndexList s = sample_rows(1000, 200, 1, "x");
    CHECK(s.size() == 200);
    CHECK(std::is_sorted(s.begin(), s.end()));
    CHECK(std::adjacent_find(s.begin(), s.end()) == s.end());
    CHECK(s == sample_rows(1000, 200, 1, "x"));
    CHECK(s != sample_rows(1000, 200, 1, "y"));
}

TEST_CASE("permutation importance leaves a pure-noise feature near zero") {
    const Toy t = toy();
    const TrainedModel knn = train_model(t.x, t.y, t.names, KnnParams{5});
    const auto raw = permutation_importance(knn, t.x, t.y);
    REQUIRE(raw.size() == 3);
    CHECK(raw[0] > 50);
    CHECK(std::abs(raw[1]) < 0.05 * raw[0]);
    CHECK(raw[0] > raw[2]);

    const ImportanceTable table = variable_importance(knn, as_table(t));
    CHECK(table.method == "permutation");
    CHECK(table.rows.front().feature == "signal");
    CHECK(table.rows.front().scaled == 100.0);
    CHECK(table.rows.back().scaled == 0.0);
    CHECK(table.top(2).size() == 2);
}

TEST_CASE("importance methods per learner") {
    const Toy t = toy();
    const PolymerTable table = as_table(t);
    const TrainedModel lm = train_model(t.x, t.y, t.names, LinearParams{});
    const ImportanceTable li = variable_importance(lm, table);
    CHECK(li.method == "abs_t");
    const LinearFit& fit = std::get<LinearFit>(lm.state);
    CHECK(li.rows.front().raw == std::abs(fit.t_stat(0)));
    CHECK(variable_importance(train_model(t.x, t.y, t.names, TreeParams{0.01}), table).method == "sse_reduction");
    CHECK(variable_importance(train_model(t.x, t.y, t.names, ElasticNetParams{0.5, 0, 0.01}), table).method ==
          "abs_coefficient");
}

TEST_CASE("dropped zero-variance features score zero") {
    Toy t = toy();
    t.x.col(1).setConstant(4.0);
    const TrainedModel lm = train_model(t.x, t.y, t.names, LinearParams{});
    const ImportanceTable imp = variable_importance(lm, as_table(t));
    REQUIRE(imp.rows.size() == 3);
    CHECK(imp.rows.back().feature == "noise");
    CHECK(imp.rows.back().raw == 0.0);
}

TEST_CASE("SHAP of a linear model tracks the closed form and sums to f(x) - baseline") {
    const Toy t = toy(150);
    const TrainedModel lm = train_model(t.x, t.y, t.names, LinearParams{});
    const LinearFit& fit = std::get<LinearFit>(lm.state);
    ShapOptions o;
    o.sims = 400;
    const ShapSummary s = shap_values(lm, t.x.topRows(20), t.x, o);
    CHECK(s.background_rows == 150);
    const Vector bg_mean = t.x.colwise().mean();
    for (Eigen::Index i = 0; i < 20; ++i) {
        for (int j = 0; j < 3; ++j) {
            const double exact = fit.coef(j) / lm.recipe.sd(j) * (t.x(i, j) - bg_mean(j));
            CHECK(std::abs(s.phi(i, j) - exact) <= 4 * s.standard_error(i, j) + 1e-9);
        }
    }
    CHECK(s.baseline == doctest::Approx(lm.predict(t.x).mean()).epsilon(1e-12));
    CHECK(s.order.front() == 0);
    CHECK(s.mean_abs(0) == doctest::Approx(s.phi.col(0).cwiseAbs().mean()).epsilon(1e-12));
}

TEST_CASE("SHAP of a single-feature model gives the other features nothing") {
    Toy t = toy(100);
    for (Eigen::Index i = 0; i < t.y.size(); ++i) t.y(i) = t.x(i, 0) * t.x(i, 0);
    const TrainedModel tree = train_model(t.x, t.y, t.names, TreeParams{0.0001});
    ShapOptions o;
    o.sims = 20;
    const ShapSummary s = shap_values(tree, t.x.topRows(10), t.x, o);
    // the tree only splits on "signal" when the other columns carry no information
    const auto& nodes = std::get<RegressionTree>(tree.state).nodes;
    bool only_signal = true;
    for (const auto& n : nodes) only_signal &= n.feature <= 0;
    if (only_signal) {
        CHECK(s.phi.col(1).cwiseAbs().maxCoeff() == 0.0);
        CHECK(s.phi.col(2).cwiseAbs().maxCoeff() == 0.0);
        // shared background draws make the Monte-Carlo error identical for every instance
        const double offset = s.phi(0, 0) - (s.prediction(0) - s.baseline);
        for (Eigen::Index i = 0; i < 10; ++i) {
            CHECK(s.phi(i, 0) - (s.prediction(i) - s.baseline) == doctest::Approx(offset).epsilon(1e-9));
            CHECK(std::abs(s.phi(i, 0) - (s.prediction(i) - s.baseline)) <= 4 * s.standard_error(i, 0));
        }
    }
    CHECK(only_signal);
}

TEST_CASE("correlation matrix matches a direct Pearson computation") {
    const Toy t = toy();
    PolymerTable table = as_table(t);
    const CorrelationMatrix c = correlation_matrix(table);
    REQUIRE(c.names.size() == 4);
    CHECK(c.names.back() == "fibre_diameter");
    Matrix all(t.x.rows(), 4);
    all.leftCols(3) = t.x;
    all.col(3) = t.y;
    for (int a = 0; a < 4; ++a) {
        for (int b = 0; b < 4; ++b) {
            const Vector u = all.col(a).array() - all.col(a).mean();
            const Vector v = all.col(b).array() - all.col(b).mean();
            const double r = u.dot(v) / std::sqrt(u.squaredNorm() * v.squaredNorm());
            CHECK(c.r(a, b) == doctest::Approx(r).epsilon(1e-12));
        }
        CHECK(c.r(a, a) == doctest::Approx(1.0).epsilon(1e-15));
    }
    table.features.col(1).setConstant(1.0);
    const CorrelationMatrix d = correlation_matrix(table);
    CHECK(d.excluded_zero_variance == std::vector<std::string>{"noise"});
    CHECK(d.names.size() == 3);
}

TEST_CASE("response surface spans observed ranges and matches predict") {
    const PolymerTable t = polymer_subset(generate_synthetic({}).records, "SYN");
    const TrainedModel lm = train_model(t.features, t.target, t.feature_names, LinearParams{});
    const ProcessInputs fixed = ProcessInputs::from_values({12, 21, 0, 18, 1, 15});
    const ResponseSurface s = response_surface(lm, t, "concentration", "voltage", fixed, 5, 4);
    CHECK(s.prediction.rows() == 5);
    CHECK(s.prediction.cols() == 4);
    CHECK(s.axis_a(0) == t.features.col(0).minCoeff());
    CHECK(s.axis_a(4) == t.features.col(0).maxCoeff());
    ProcessInputs probe = fixed;
    probe.concentration = s.axis_a(2);
    probe.voltage = s.axis_b(3);
    Matrix row = feature_row(t, probe).transpose();
    CHECK(s.prediction(2, 3) == lm.predict(row)(0));
    CHECK_THROWS_AS_CODE(response_surface(lm, t, "humidity", "voltage", fixed), ErrorCode::missing_feature);
}
