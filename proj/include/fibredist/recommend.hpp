#pragma once

#include <array>
#include <string>
#include <vector>

#include "fibredist/dataset.hpp"

namespace fibredist {

struct SolventRecommendation {
    std::array<std::string, 3> solvents;
    std::array<double, 3> median_ratios{};  // percent
    std::size_t support = 0;                // top-k rows carrying the winning triplet
    std::vector<std::size_t> candidates;    // indices into the given rows, best score first
    std::vector<double> scores;             // aligned with candidates

    // "WATER + NONE + NONE. Median ratios: 100% / 0% / 0% (from 10 closest rows)"
    std::string sentence() const;
};

struct RecommendOptions {
    std::size_t k = 10;
    double weight = 0.7;  // share of parameter proximity in the score
};

// Scores every row by a convex combination of min-max normalised parameter
// distance (each parameter scaled by its standard deviation) and diameter
// distance to the prediction, keeps the k best, and reports the most frequent
// solvent triplet among them with its median ratios.
SolventRecommendation recommend_solvents(const std::vector<StudyRecord>& rows, const ProcessInputs& inputs,
                                         double predicted_diameter, const RecommendOptions& options = {});

}  // namespace fibredist
