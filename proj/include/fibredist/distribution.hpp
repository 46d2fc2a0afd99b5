#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fibredist/common.hpp"

namespace fibredist {

struct PredictiveDistribution {
    double point = 0;                   // model prediction, nm
    std::vector<double> realisations;   // point + draws[i]
    std::vector<double> draws;          // residuals sampled from the pool
    std::vector<std::size_t> draw_index;
    std::uint64_t seed = kDefaultSeed;
};

// Residual bootstrap: each realisation is the point prediction plus a residual
// drawn uniformly with replacement from the pool.
PredictiveDistribution residual_bootstrap(double point, const std::vector<double>& pool, int m = 100,
                                          std::uint64_t seed = kDefaultSeed);

struct KsResult {
    double d = 0;
    double p = 1;
};
struct MannWhitneyResult {
    double u = 0;
    double p = 1;
};
struct WelchResult {
    double t = 0;
    double df = 0;
    double p = 1;
};
struct NormalityResult {
    double w = 1;
    double p = 1;
    std::size_t n = 0;
};

KsResult ks_test(const std::vector<double>& a, const std::vector<double>& b);
// Asymptotic two-sided KS tail probability for statistic d with effective size ne.
double ks_p_value(double d, double ne);
MannWhitneyResult mann_whitney(const std::vector<double>& a, const std::vector<double>& b);
WelchResult welch_t(const std::vector<double>& a, const std::vector<double>& b);

// Gaussian KDE pair on a shared grid; used by the overlap and KL measures.
struct KdePair {
    std::vector<double> grid;
    std::vector<double> fa;
    std::vector<double> fb;
    double ha = 0;
    double hb = 0;
};

double silverman_bandwidth(const std::vector<double>& x);
KdePair kde_pair(const std::vector<double>& a, const std::vector<double>& b, int points = 512);
double overlap_coefficient(const std::vector<double>& a, const std::vector<double>& b);
double kl_divergence(const std::vector<double>& a, const std::vector<double>& b);
double wasserstein1(const std::vector<double>& a, const std::vector<double>& b);
NormalityResult shapiro_wilk(std::vector<double> x);

// Sample quantile, linear interpolation between order statistics (type 7).
double quantile(std::vector<double> x, double q);

struct DistComparison {
    std::optional<KsResult> ks;
    std::optional<MannWhitneyResult> mwu;
    std::optional<WelchResult> welch;
    std::optional<double> ovl;
    std::optional<double> kl;
    std::optional<double> wasserstein;
    std::optional<NormalityResult> normality_a;
    std::optional<NormalityResult> normality_b;
    std::vector<std::string> notes;  // why a statistic is absent
    std::size_t n_a = 0;
    std::size_t n_b = 0;
};

// a is the reference ("real") sample, b the simulated one; KL is KL(a || b).
DistComparison compare_distributions(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace fibredist
