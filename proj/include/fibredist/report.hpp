#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "fibredist/artifacts.hpp"
#include "fibredist/zip.hpp"

namespace fibredist {

inline constexpr std::array<std::string_view, 9> kSheetNames = {
    "Summary",     "Out_of_Range", "CV_Predictions",      "Prediction_Distribution", "Metrics",
    "Coefficients", "Variable_Importance", "SHAP_Summary", "Correlation_Matrix"};

inline constexpr std::array<std::string_view, 5> kFigureNames = {
    "prediction_distribution", "predicted_vs_observed", "variable_importance", "shap_summary",
    "correlation_heatmap"};

inline constexpr std::string_view kNoCoefficientsNote = "no transparent coefficients";

// Archive members in write order: manifest.json, sheets/<name>.csv, figures/<name>.svg.
struct ReportBundle {
    std::vector<zip::Entry> members;

    const std::string* find(std::string_view path) const;
    const std::string& sheet(std::string_view name) const;  // throws not_found
    std::string archive() const;
};

// Sheet bytes depend only on the artifacts; created_at only reaches the manifest.
ReportBundle build_report(const RunArtifacts& artifacts);
std::string render_sheet(const RunArtifacts& artifacts, std::string_view name);
std::string render_manifest(const RunArtifacts& artifacts, const std::vector<zip::Entry>& members);

void write_bundle(const ReportBundle& bundle, const std::filesystem::path& path);

// Parses an archive and checks every member against the manifest's SHA-256
// and size; throws io_error on any mismatch or unlisted member.
ReportBundle read_bundle(std::string_view archive);
ReportBundle read_bundle_file(const std::filesystem::path& path);

// Full JSON payload served by GET /api/runs/{id}/result.
std::string result_json(const RunArtifacts& artifacts);

// Key/value rows of the Summary sheet, in order.
std::vector<std::pair<std::string, std::string>> summary_rows(const RunArtifacts& artifacts);

}  // namespace fibredist
