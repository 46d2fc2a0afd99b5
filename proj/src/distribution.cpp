#include "fibredist/distribution.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

namespace fibredist {

namespace {

void require_nonempty(const std::vector<double>& a, const std::vector<double>& b, const char* what) {
    if (a.empty() || b.empty()) throw Error(ErrorCode::invalid_argument, std::string(what) + ": empty sample");
}

double mean_of(const std::vector<double>& x) {
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double variance_of(const std::vector<double>& x) {
    const double m = mean_of(x);
    double ss = 0;
    for (double v : x) ss += (v - m) * (v - m);
    return ss / static_cast<double>(x.size() - 1);
}

double upper_normal(double z) {
    return boost::math::cdf(boost::math::complement(boost::math::normal(), z));
}

// cc[0] + cc[1] x + cc[2] x^2 + ...
double poly(const double* cc, int nord, double x) {
    double result = cc[0];
    if (nord > 1) {
        double p = x * cc[nord - 1];
        for (int j = nord - 2; j > 0; --j) p = (p + cc[j]) * x;
        result += p;
    }
    return result;
}

double trapezoid(const std::vector<double>& f, double dx) {
    double s = 0;
    for (std::size_t i = 0; i + 1 < f.size(); ++i) s += 0.5 * (f[i] + f[i + 1]) * dx;
    return s;
}

}  // namespace

PredictiveDistribution residual_bootstrap(double point, const std::vector<double>& pool, int m,
                                          std::uint64_t seed) {
    if (pool.empty()) throw Error(ErrorCode::invalid_argument, "residual pool is empty");
    if (m < 1) throw Error(ErrorCode::invalid_argument, "bootstrap needs at least one realisation");
    PredictiveDistribution d;
    d.point = point;
    d.seed = seed;
    Rng rng(derive_seed(seed, "bootstrap.residual"));
    for (int i = 0; i < m; ++i) {
        const std::size_t k = uniform_index(rng, pool.size());
        d.draw_index.push_back(k);
        d.draws.push_back(pool[k]);
        d.realisations.push_back(point + pool[k]);
    }
    return d;
}

double ks_p_value(double d, double ne) {
    if (d <= 0) return 1.0;
    const double sq = std::sqrt(ne);
    const double lambda = (sq + 0.12 + 0.11 / sq) * d;
    const double a2 = -2.0 * lambda * lambda;
    double sum = 0, sign = 1, previous = 0;
    for (int k = 1; k <= 100; ++k) {
        const double term = sign * 2.0 * std::exp(a2 * k * k);
        sum += term;
        if (std::abs(term) <= 1e-3 * previous || std::abs(term) <= 1e-8 * sum) return std::clamp(sum, 0.0, 1.0);
        sign = -sign;
        previous = std::abs(term);
    }
    return 1.0;  // series failed to converge: lambda is tiny
}

KsResult ks_test(const std::vector<double>& a, const std::vector<double>& b) {
    require_nonempty(a, b, "ks_test");
    std::vector<double> sa = a, sb = b;
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    const double na = static_cast<double>(sa.size()), nb = static_cast<double>(sb.size());
    std::size_t i = 0, j = 0;
    double d = 0;
    while (i < sa.size() && j < sb.size()) {
        const double v = std::min(sa[i], sb[j]);
        while (i < sa.size() && sa[i] == v) ++i;
        while (j < sb.size() && sb[j] == v) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    KsResult r;
    r.d = d;
    r.p = ks_p_value(d, na * nb / (na + nb));
    return r;
}

MannWhitneyResult mann_whitney(const std::vector<double>& a, const std::vector<double>& b) {
    require_nonempty(a, b, "mann_whitney");
    const std::size_t na = a.size(), nb = b.size(), n = na + nb;
    std::vector<std::pair<double, int>> pooled;
    pooled.reserve(n);
    for (double v : a) pooled.push_back({v, 0});
    for (double v : b) pooled.push_back({v, 1});
    std::sort(pooled.begin(), pooled.end());
    double rank_sum_a = 0, tie_term = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && pooled[j].first == pooled[i].first) ++j;
        const double midrank = 0.5 * static_cast<double>(i + 1 + j);
        const double t = static_cast<double>(j - i);
        tie_term += t * t * t - t;
        for (std::size_t k = i; k < j; ++k) {
            if (pooled[k].second == 0) rank_sum_a += midrank;
        }
        i = j;
    }
    const double fa = static_cast<double>(na), fb = static_cast<double>(nb), fn = static_cast<double>(n);
    const double ua = rank_sum_a - fa * (fa + 1) / 2;
    MannWhitneyResult r;
    r.u = std::min(ua, fa * fb - ua);
    const double var = fa * fb / 12.0 * ((fn + 1) - tie_term / (fn * (fn - 1)));
    if (!(var > 0)) {
        r.p = 1.0;
        return r;
    }
    const double diff = ua - fa * fb / 2;
    const double correction = diff > 0 ? 0.5 : (diff < 0 ? -0.5 : 0.0);
    const double z = (diff - correction) / std::sqrt(var);
    r.p = std::clamp(2.0 * std::min(upper_normal(z), upper_normal(-z)), 0.0, 1.0);
    return r;
}

WelchResult welch_t(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() < 2 || b.size() < 2) throw Error(ErrorCode::invalid_argument, "welch_t needs >= 2 values per sample");
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    const double ma = mean_of(a), mb = mean_of(b);
    const double va = variance_of(a) / na, vb = variance_of(b) / nb;
    WelchResult r;
    const double se2 = va + vb;
    if (!(se2 > 0)) {
        r.df = na + nb - 2;
        if (ma == mb) {
            r.t = 0;
            r.p = 1;
        } else {
            r.t = ma > mb ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
            r.p = 0;
        }
        return r;
    }
    r.t = (ma - mb) / std::sqrt(se2);
    r.df = se2 * se2 / (va * va / (na - 1) + vb * vb / (nb - 1));
    const boost::math::students_t dist(r.df);
    r.p = std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t))), 0.0, 1.0);
    return r;
}

double quantile(std::vector<double> x, double q) {
    if (x.empty()) throw Error(ErrorCode::invalid_argument, "quantile of an empty sample");
    std::sort(x.begin(), x.end());
    const double h = (static_cast<double>(x.size()) - 1) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, x.size() - 1);
    return x[lo] + (h - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

double silverman_bandwidth(const std::vector<double>& x) {
    if (x.size() < 2) return 0;
    const double sd = std::sqrt(variance_of(x));
    const double iqr = quantile(x, 0.75) - quantile(x, 0.25);
    double spread = std::min(sd, iqr / 1.34);
    if (!(spread > 0)) spread = sd;
    return 0.9 * spread * std::pow(static_cast<double>(x.size()), -0.2);
}

KdePair kde_pair(const std::vector<double>& a, const std::vector<double>& b, int points) {
    if (a.size() < 2 || b.size() < 2) throw Error(ErrorCode::invalid_argument, "density estimates need >= 2 values per sample");
    const auto [amin, amax] = std::minmax_element(a.begin(), a.end());
    const auto [bmin, bmax] = std::minmax_element(b.begin(), b.end());
    const double lo = std::min(*amin, *bmin), hi = std::max(*amax, *bmax);
    const double floor = 1e-6 * (hi > lo ? hi - lo : 1.0);
    KdePair k;
    k.ha = std::max(silverman_bandwidth(a), floor);
    k.hb = std::max(silverman_bandwidth(b), floor);
    const double h = std::max(k.ha, k.hb);
    const double g0 = lo - 3 * h, g1 = hi + 3 * h;
    k.grid.resize(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i) k.grid[static_cast<std::size_t>(i)] = g0 + (g1 - g0) * i / (points - 1);
    auto density = [&](const std::vector<double>& x, double bw) {
        std::vector<double> f(k.grid.size(), 0.0);
        const double norm = 1.0 / (static_cast<double>(x.size()) * bw * std::sqrt(2 * M_PI));
        for (std::size_t g = 0; g < k.grid.size(); ++g) {
            double s = 0;
            for (double v : x) {
                const double u = (k.grid[g] - v) / bw;
                s += std::exp(-0.5 * u * u);
            }
            f[g] = s * norm;
        }
        return f;
    };
    k.fa = density(a, k.ha);
    k.fb = density(b, k.hb);
    return k;
}

double overlap_coefficient(const std::vector<double>& a, const std::vector<double>& b) {
    const KdePair k = kde_pair(a, b);
    std::vector<double> m(k.grid.size());
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = std::min(k.fa[i], k.fb[i]);
    return std::clamp(trapezoid(m, k.grid[1] - k.grid[0]), 0.0, 1.0);
}

double kl_divergence(const std::vector<double>& a, const std::vector<double>& b) {
    const KdePair k = kde_pair(a, b);
    const double dx = k.grid[1] - k.grid[0];
    std::vector<double> fa(k.fa), fb(k.fb);
    for (auto* f : {&fa, &fb}) {
        double s = 0;
        for (double& v : *f) {
            v = std::max(v, 1e-12);
            s += v * dx;
        }
        for (double& v : *f) v /= s;
    }
    double kl = 0;
    for (std::size_t i = 0; i < fa.size(); ++i) kl += fa[i] * std::log(fa[i] / fb[i]) * dx;
    return std::max(kl, 0.0);
}

double wasserstein1(const std::vector<double>& a, const std::vector<double>& b) {
    require_nonempty(a, b, "wasserstein1");
    std::vector<double> sa = a, sb = b;
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    const double na = static_cast<double>(sa.size()), nb = static_cast<double>(sb.size());
    std::size_t i = 0, j = 0;
    double total = 0;
    double prev = std::min(sa[0], sb[0]);
    while (i < sa.size() || j < sb.size()) {
        double v;
        if (j >= sb.size() || (i < sa.size() && sa[i] <= sb[j])) v = sa[i]; else v = sb[j];
        total += std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb) * (v - prev);
        while (i < sa.size() && sa[i] == v) ++i;
        while (j < sb.size() && sb[j] == v) ++j;
        prev = v;
    }
    return total;
}

NormalityResult shapiro_wilk(std::vector<double> x) {
    const std::size_t n = x.size();
    if (n < 3 || n > 5000) {
        throw Error(ErrorCode::invalid_argument,
                    "Shapiro-Wilk needs 3 <= n <= 5000; got n=" + std::to_string(n));
    }
    std::sort(x.begin(), x.end());
    const double range = x[n - 1] - x[0];
    if (!(range > 1e-19 * std::max(1.0, std::abs(x[0])))) {
        throw Error(ErrorCode::degenerate_data, "Shapiro-Wilk: all values are identical");
    }
    static const double g[2] = {-2.273, .459};
    static const double c1[6] = {0., .221157, -.147981, -2.07119, 4.434685, -2.706056};
    static const double c2[6] = {0., .042981, -.293762, -1.752461, 5.682633, -3.582633};
    static const double c3[4] = {.544, -.39978, .025054, -6.714e-4};
    static const double c4[4] = {1.3822, -.77857, .062767, -.0020322};
    static const double c5[4] = {-1.5861, -.31082, -.083751, .0038915};
    static const double c6[3] = {-.4803, -.082676, .0030302};

    const std::size_t half = n / 2;
    const double an = static_cast<double>(n);
    std::vector<double> a(half + 1);  // 1-based half coefficients
    if (n == 3) {
        a[1] = std::sqrt(0.5);
    } else {
        const boost::math::normal std_normal;
        const double an25 = an + .25;
        double summ2 = 0;
        for (std::size_t i = 1; i <= half; ++i) {
            a[i] = boost::math::quantile(std_normal, (static_cast<double>(i) - .375) / an25);
            summ2 += a[i] * a[i];
        }
        summ2 *= 2;
        const double ssumm2 = std::sqrt(summ2);
        const double rsn = 1 / std::sqrt(an);
        const double a1 = poly(c1, 6, rsn) - a[1] / ssumm2;
        std::size_t first;
        double fac;
        if (n > 5) {
            first = 3;
            const double a2 = -a[2] / ssumm2 + poly(c2, 6, rsn);
            fac = std::sqrt((summ2 - 2 * (a[1] * a[1]) - 2 * (a[2] * a[2])) / (1 - 2 * (a1 * a1) - 2 * (a2 * a2)));
            a[2] = a2;
        } else {
            first = 2;
            fac = std::sqrt((summ2 - 2 * (a[1] * a[1])) / (1 - 2 * (a1 * a1)));
        }
        a[1] = a1;
        for (std::size_t i = first; i <= half; ++i) a[i] /= -fac;
    }

    // W as the squared correlation between the scaled data and the
    // antisymmetric coefficient vector.
    std::vector<double> coef(n, 0.0);
    for (std::size_t i = 0; i < half; ++i) {
        coef[i] = -a[i + 1];
        coef[n - 1 - i] = a[i + 1];
    }
    double sa = 0, sx = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sa += coef[i];
        sx += x[i] / range;
    }
    sa /= an;
    sx /= an;
    double ssa = 0, ssx = 0, sax = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double asa = coef[i] - sa;
        const double xsx = x[i] / range - sx;
        ssa += asa * asa;
        ssx += xsx * xsx;
        sax += asa * xsx;
    }
    const double ssassx = std::sqrt(ssa * ssx);
    const double w1 = (ssassx - sax) * (ssassx + sax) / (ssa * ssx);
    NormalityResult r;
    r.n = n;
    r.w = 1 - w1;

    if (n == 3) {
        const double pi6 = 1.90985931710274;  // 6 / pi
        const double stqr = 1.04719755119660; // pi / 3
        r.p = std::max(0.0, pi6 * (std::asin(std::sqrt(r.w)) - stqr));
        return r;
    }
    double y = std::log(w1);
    const double lxx = std::log(an);
    double m, s;
    if (n <= 11) {
        const double gamma = poly(g, 2, an);
        if (y >= gamma) {
            r.p = 1e-99;
            return r;
        }
        y = -std::log(gamma - y);
        m = poly(c3, 4, an);
        s = std::exp(poly(c4, 4, an));
    } else {
        m = poly(c5, 4, lxx);
        s = std::exp(poly(c6, 3, lxx));
    }
    r.p = std::clamp(upper_normal((y - m) / s), 0.0, 1.0);
    return r;
}

DistComparison compare_distributions(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.empty() && b.empty()) throw Error(ErrorCode::invalid_argument, "both samples are empty");
    DistComparison c;
    c.n_a = a.size();
    c.n_b = b.size();
    auto attempt = [&](const char* name, auto&& fn) {
        try {
            fn();
        } catch (const Error& e) {
            c.notes.push_back(std::string(name) + ": " + e.what());
        }
    };
    attempt("ks", [&] { c.ks = ks_test(a, b); });
    attempt("mwu", [&] { c.mwu = mann_whitney(a, b); });
    attempt("welch_t", [&] { c.welch = welch_t(a, b); });
    attempt("ovl", [&] { c.ovl = overlap_coefficient(a, b); });
    attempt("kl", [&] { c.kl = kl_divergence(a, b); });
    attempt("wasserstein", [&] { c.wasserstein = wasserstein1(a, b); });
    attempt("shapiro_wilk_a", [&] { c.normality_a = shapiro_wilk(a); });
    attempt("shapiro_wilk_b", [&] { c.normality_b = shapiro_wilk(b); });
    return c;
}

}  // namespace fibredist
