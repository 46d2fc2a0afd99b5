#include <algorithm>
#include <numeric>

#include "doctest.h"
#include "fibredist/distribution.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace fibredist;

namespace {

const std::vector<double> kA = {2.1, 3.4, 1.9, 5.6, 4.4, 3.3, 2.8, 4.9, 3.7, 2.2};
const std::vector<double> kB = {3.9, 4.8, 5.1, 6.2, 4.4, 5.7, 3.8, 6.6, 5.0, 4.1, 5.5};

std::vector<double> normal_draws(std::size_t n, double mean, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> out(n);
    for (auto& v : out) v = mean + standard_normal(rng);
    return out;
}

}  // namespace

TEST_CASE("residual bootstrap realisations are point plus pool members") {
    const std::vector<double> pool = {-3.25, 0.1, 7.5, -0.3, 12.0};
    const PredictiveDistribution d = residual_bootstrap(142.875, pool, 500, 9);
    REQUIRE(d.realisations.size() == 500);
    for (std::size_t i = 0; i < 500; ++i) {
        CHECK(d.draws[i] == pool[d.draw_index[i]]);
        CHECK(d.realisations[i] == 142.875 + d.draws[i]);
        CHECK(std::find(pool.begin(), pool.end(), d.draws[i]) != pool.end());
    }
    const PredictiveDistribution z = residual_bootstrap(5.0, std::vector<double>(10, 0.0), 100, 1);
    for (double v : z.realisations) CHECK(v == 5.0);
    CHECK_THROWS_AS_CODE(residual_bootstrap(1, {}, 10, 1), ErrorCode::invalid_argument);
}

TEST_CASE("KS statistic hand cases") {
    CHECK(ks_test({1, 2, 3}, {1, 2, 3}).d == 0.0);
    CHECK(ks_test({1, 2, 3}, {4, 5, 6}).d == 1.0);
    CHECK(ks_test({1, 2, 3, 4}, {3, 4, 5, 6}).d == 0.5);
    CHECK(ks_test(kA, kB).d == doctest::Approx(0.7).epsilon(1e-15));
}

TEST_CASE("KS p-value follows the Kolmogorov series") {
    const double ne = 10.0 * 11.0 / 21.0;
    const double lambda = (std::sqrt(ne) + 0.12 + 0.11 / std::sqrt(ne)) * 0.7;
    double q = 0;
    for (int j = 1; j <= 200; ++j) q += 2 * ((j % 2) ? 1 : -1) * std::exp(-2.0 * j * j * lambda * lambda);
    CHECK(ks_test(kA, kB).p == doctest::Approx(q).epsilon(1e-6));
    CHECK(ks_p_value(0, 10) == 1.0);
}

TEST_CASE("Mann-Whitney and Welch match reference values") {
    const auto mw = mann_whitney(kA, kB);
    CHECK(mw.u == 16.5);
    CHECK(mw.p == doctest::Approx(0.00743403883844131).epsilon(1e-9));
    const auto w = welch_t(kA, kB);
    CHECK(w.t == doctest::Approx(-3.2717718318440947).epsilon(1e-12));
    CHECK(w.df == doctest::Approx(16.589396244617035).epsilon(1e-12));
    CHECK(w.p == doctest::Approx(0.0046135321680113835).epsilon(1e-9));
}

TEST_CASE("Shapiro-Wilk matches reference values") {
    const std::vector<double> x = {0.139, 0.157, 0.175, 0.256, 0.344, 0.413, 0.503, 0.577, 0.614,
                                   0.655, 0.954, 1.392, 1.557, 1.648, 1.690, 1.994, 2.174, 2.206,
                                   3.245, 3.510, 3.571, 4.354, 4.980, 6.084, 8.351};
    struct Case {
        std::vector<double> data;
        double w, p;
    };
    const std::vector<Case> cases = {
        {kA, 0.9465216880726992, 0.6275681650888538},
        {kB, 0.9572241956991971, 0.7366492739357866},
        {x, 0.8346662753381485, 0.0009134904825887374},
        {{1, 2, 3}, 1.0, 1.0},
        {{0.511822, 0.950464, 0.14416,  0.948649, 0.311831, 0.423326, 0.827703, 0.409199, 0.549594, 0.027559,
          0.753513, 0.538143, 0.329732, 0.788429, 0.303195, 0.453498, 0.134042, 0.403113, 0.203455, 0.262313,
          0.750365, 0.280409, 0.485191, 0.980737, 0.961657, 0.72479,  0.541227, 0.276891, 0.160652, 0.969925,
          0.516069, 0.115866, 0.62349,  0.776683, 0.613003, 0.917298, 0.039593, 0.528589, 0.459336, 0.06235,
          0.641328, 0.852633, 0.592941, 0.260097, 0.839882, 0.509496, 0.510889, 0.75303,  0.147922, 0.819627,
          0.683287, 0.787097, 0.191616, 0.802364, 0.191324, 0.081553, 0.855227, 0.861283, 0.876537, 0.47191},
         0.94851789260769, 0.013273993602103068},
    };
    for (const auto& c : cases) {
        const NormalityResult r = shapiro_wilk(c.data);
        CHECK(std::abs(r.w - c.w) < 1e-3);
        CHECK(std::abs(r.p - c.p) < 1e-3);
        CHECK(r.n == c.data.size());
    }
    CHECK_THROWS_AS_CODE(shapiro_wilk({1, 2}), ErrorCode::invalid_argument);
    CHECK_THROWS_AS_CODE(shapiro_wilk({4, 4, 4, 4}), ErrorCode::degenerate_data);
}

TEST_CASE("Wasserstein-1 translation and metric axioms") {
    Rng rng(3);
    auto sample = [&](std::size_t n) {
        std::vector<double> v(n);
        for (auto& x : v) x = 10 * uniform01(rng);
        return v;
    };
    for (int trial = 0; trial < 50; ++trial) {
        const auto a = sample(20 + static_cast<std::size_t>(trial));
        const auto b = sample(17);
        const auto c = sample(33);
        const double shift = 0.25 * trial;  // exactly representable
        std::vector<double> moved = a;
        for (auto& v : moved) v += shift;
        CHECK(std::abs(wasserstein1(a, moved) - shift) < 1e-12);
        const double ab = wasserstein1(a, b), bc = wasserstein1(b, c), ac = wasserstein1(a, c);
        CHECK(wasserstein1(a, a) == 0.0);
        CHECK(std::abs(ab - wasserstein1(b, a)) < 1e-9);
        CHECK(ac <= ab + bc + 1e-9);
        CHECK(ab >= 0);
        CHECK(ab == doctest::Approx(oracle::ecdf_area(a, b)).epsilon(1e-9));
    }
}

TEST_CASE("overlap and KL of N(0,1) vs N(1,1)") {
    const auto a = normal_draws(10000, 0.0, 1);
    const auto b = normal_draws(10000, 1.0, 2);
    CHECK(std::abs(overlap_coefficient(a, b) - 0.617) < 0.05);
    CHECK(std::abs(kl_divergence(a, b) - 0.5) < 0.1);
    CHECK(overlap_coefficient(a, a) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(kl_divergence(a, a) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("KDE densities integrate to one") {
    const auto a = normal_draws(500, 0.0, 4);
    const auto b = normal_draws(300, 3.0, 5);
    const KdePair k = kde_pair(a, b);
    REQUIRE(k.grid.size() == 512);
    const double dx = k.grid[1] - k.grid[0];
    double ia = 0, ib = 0;
    for (std::size_t i = 0; i + 1 < k.grid.size(); ++i) {
        ia += 0.5 * (k.fa[i] + k.fa[i + 1]) * dx;
        ib += 0.5 * (k.fb[i] + k.fb[i + 1]) * dx;
    }
    CHECK(ia == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(ib == doctest::Approx(1.0).epsilon(1e-3));
    // Silverman: 0.9 min(sd, IQR / 1.34) n^(-1/5)
    const std::vector<double> x = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    const double sd = std::sqrt(82.5 / 9.0);
    const double iqr = quantile(x, 0.75) - quantile(x, 0.25);
    CHECK(silverman_bandwidth(x) == doctest::Approx(0.9 * std::min(sd, iqr / 1.34) * std::pow(10.0, -0.2)).epsilon(1e-12));
}

TEST_CASE("type 7 quantiles") {
    const std::vector<double> x = {3, 1, 4, 1, 5, 9, 2, 6};
    CHECK(quantile(x, 0.1) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(quantile(x, 0.5) == 3.5);
    CHECK(quantile(x, 0.9) == doctest::Approx(6.9).epsilon(1e-15));
    CHECK(quantile(x, 0.0) == 1);
    CHECK(quantile(x, 1.0) == 9);
}

TEST_CASE("comparison battery records why a statistic is absent") {
    const DistComparison full = compare_distributions(kA, kB);
    CHECK(full.ks);
    CHECK(full.mwu);
    CHECK(full.welch);
    CHECK(full.ovl);
    CHECK(full.kl);
    CHECK(full.wasserstein);
    CHECK(full.normality_a);
    CHECK(full.notes.empty());

    const DistComparison tiny = compare_distributions({1.0, 2.0}, kB);
    CHECK_FALSE(tiny.normality_a);
    CHECK(tiny.normality_b);
    REQUIRE_FALSE(tiny.notes.empty());
    CHECK(tiny.notes[0].rfind("shapiro_wilk_a", 0) == 0);
}
