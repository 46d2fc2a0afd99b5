#include "fibredist/recommend.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>

namespace fibredist {

namespace {

double sample_sd(const std::vector<double>& v) {
    if (v.size() < 2) return 0;
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

std::vector<double> min_max(const std::vector<double>& v) {
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    std::vector<double> out(v.size(), 0.0);
    if (*hi > *lo) {
        for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - *lo) / (*hi - *lo);
    }
    return out;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string percent(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g%%", v);
    return buf;
}

}  // namespace

std::string SolventRecommendation::sentence() const {
    return solvents[0] + " + " + solvents[1] + " + " + solvents[2] + ". Median ratios: " + percent(median_ratios[0]) +
           " / " + percent(median_ratios[1]) + " / " + percent(median_ratios[2]) + " (from " +
           std::to_string(candidates.size()) + " closest rows)";
}

SolventRecommendation recommend_solvents(const std::vector<StudyRecord>& rows, const ProcessInputs& inputs,
                                         double predicted_diameter, const RecommendOptions& options) {
    if (rows.empty()) throw Error(ErrorCode::invalid_argument, "no rows to recommend solvents from");
    if (!(options.weight >= 0 && options.weight <= 1)) {
        throw Error(ErrorCode::invalid_argument, "recommendation weight must lie in [0, 1]");
    }
    const std::size_t n = rows.size();
    std::array<double, 6> sd{};
    for (std::size_t k = 0; k < 6; ++k) {
        std::vector<double> col(n);
        for (std::size_t i = 0; i < n; ++i) col[i] = rows[i].process()[k];
        sd[k] = sample_sd(col);
    }
    std::vector<double> diam(n);
    for (std::size_t i = 0; i < n; ++i) diam[i] = rows[i].fibre_diameter;
    const double diam_sd = sample_sd(diam);

    const auto q = inputs.values();
    std::vector<double> param_dist(n), diam_dist(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto p = rows[i].process();
        double s = 0;
        for (std::size_t k = 0; k < 6; ++k) {
            if (sd[k] > 0) {
                const double d = (p[k] - q[k]) / sd[k];
                s += d * d;
            }
        }
        param_dist[i] = std::sqrt(s);
        diam_dist[i] = diam_sd > 0 ? std::abs(diam[i] - predicted_diameter) / diam_sd : 0.0;
    }
    const auto pn = min_max(param_dist);
    const auto dn = min_max(diam_dist);
    std::vector<double> score(n);
    for (std::size_t i = 0; i < n; ++i) score[i] = options.weight * pn[i] + (1 - options.weight) * dn[i];

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return score[a] < score[b]; });
    order.resize(std::min(std::max<std::size_t>(options.k, 1), n));

    // triplet -> (count, total score)
    std::map<std::array<std::string, 3>, std::pair<std::size_t, double>> tally;
    for (std::size_t i : order) {
        auto& t = tally[rows[i].solvents];
        ++t.first;
        t.second += score[i];
    }
    auto best = tally.begin();
    for (auto it = tally.begin(); it != tally.end(); ++it) {
        const auto& [c, s] = it->second;
        const auto& [bc, bs] = best->second;
        if (c > bc || (c == bc && s < bs)) best = it;  // map order settles remaining ties lexicographically
    }

    SolventRecommendation r;
    r.solvents = best->first;
    r.support = best->second.first;
    for (std::size_t i : order) {
        r.candidates.push_back(i);
        r.scores.push_back(score[i]);
    }
    for (std::size_t k = 0; k < 3; ++k) {
        std::vector<double> ratios;
        for (std::size_t i : order) {
            if (rows[i].solvents != r.solvents) continue;
            const auto& ratio = rows[i].solvent_ratios[k];
            if (ratio) ratios.push_back(*ratio);
            else if (rows[i].solvents[k] == kNoSolvent) ratios.push_back(0.0);
        }
        r.median_ratios[k] = ratios.empty() ? 0.0 : median(std::move(ratios));
    }
    return r;
}

}  // namespace fibredist
