#pragma once

#include <string>
#include <vector>

#include "fibredist/common.hpp"

// Small standalone SVG charts for the report bundle. Output depends only on
// the inputs; coordinates are printed with two decimals.
namespace fibredist::svg {

// Sturges-binned histogram with a dotted vertical marker line.
std::string histogram(const std::vector<double>& values, double marker, const std::string& title,
                      const std::string& x_label);

// Points (observed, predicted) with the y = x line.
std::string scatter_with_unity(const Vector& observed, const Vector& predicted, const std::string& title);

// Horizontal bars, drawn in the given order from the top.
std::string bar_chart(const std::vector<std::string>& labels, const std::vector<double>& values,
                      const std::string& title);

// One row of dots per feature: x = phi, colour = feature value rank within the row.
std::string shap_dots(const std::vector<std::string>& features, const std::vector<std::vector<double>>& phi,
                      const std::vector<std::vector<double>>& values, const std::string& title);

// Square matrix of values in [-1, 1] with the numbers printed in each cell.
std::string heatmap(const std::vector<std::string>& names, const Matrix& r, const std::string& title);

std::string escape(const std::string& text);

}  // namespace fibredist::svg
