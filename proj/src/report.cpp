#include "fibredist/report.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <map>
#include <set>
#include <sstream>

#include "fibredist/csv.hpp"
#include "fibredist/hash.hpp"
#include "fibredist/svg.hpp"
#include "json.hpp"

namespace fibredist {

using nlohmann::ordered_json;

namespace {

std::string fmt(double v) { return csv::format_double(v); }
std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : "NA"; }

ordered_json jnum(double v) {
    if (!std::isfinite(v)) return nullptr;
    return v;
}
ordered_json jnum(const std::optional<double>& v) { return v ? jnum(*v) : ordered_json(nullptr); }

ordered_json jvec(const Vector& v) {
    ordered_json a = ordered_json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(jnum(v(i)));
    return a;
}

ordered_json jvec(const std::vector<double>& v) {
    ordered_json a = ordered_json::array();
    for (double x : v) a.push_back(jnum(x));
    return a;
}

class Sheet {
public:
    explicit Sheet(const csv::Row& header) { add(header); }
    void add(const csv::Row& row) { out_ += csv::join(row) + "\n"; }
    std::string str() const { return out_; }

private:
    std::string out_;
};

std::string range_message(const RunArtifacts& a) {
    if (a.violations.empty()) return "All parameters are within the observed range";
    return std::to_string(a.violations.size()) + " parameter(s) outside the observed range";
}

bool is_violation(const RunArtifacts& a, const std::string& feature) {
    return std::any_of(a.violations.begin(), a.violations.end(),
                       [&](const RangeViolation& v) { return v.feature == feature; });
}

std::string sheet_summary(const RunArtifacts& a) {
    Sheet s({"key", "value"});
    for (const auto& [k, v] : summary_rows(a)) s.add({k, v});
    return s.str();
}

std::string sheet_out_of_range(const RunArtifacts& a) {
    Sheet s({"feature", "value", "min", "max", "within_range"});
    const auto values = a.request.inputs.values();
    for (std::size_t i = 0; i < kProcessFeatures.size(); ++i) {
        const std::string name(kProcessFeatures[i]);
        const FeatureRange* r = a.range.find(name);
        s.add({name, fmt(values[i]), r ? fmt(r->min) : "NA", r ? fmt(r->max) : "NA",
               is_violation(a, name) ? "false" : "true"});
    }
    return s.str();
}

std::string sheet_cv_predictions(const RunArtifacts& a) {
    Sheet s({"row", "study", "fold", "observed", "predicted", "residual"});
    for (Eigen::Index i = 0; i < a.observed.size(); ++i) {
        const auto r = static_cast<std::size_t>(i);
        s.add({std::to_string(i), a.study_labels[static_cast<std::size_t>(a.study_of_row[r])],
               std::to_string(a.cv.fold_of_row[r]), fmt(a.observed(i)), fmt(a.cv.oof(i)),
               fmt(a.observed(i) - a.cv.oof(i))});
    }
    return s.str();
}

std::string sheet_distribution(const RunArtifacts& a) {
    Sheet s({"draw", "pool_row", "residual", "point", "realisation"});
    const auto& d = a.distribution;
    for (std::size_t i = 0; i < d.realisations.size(); ++i) {
        s.add({std::to_string(i), std::to_string(d.draw_index[i]), fmt(d.draws[i]), fmt(d.point),
               fmt(d.realisations[i])});
    }
    return s.str();
}

std::string sheet_metrics(const RunArtifacts& a) {
    Sheet s({"fold", "label", "n", "RMSE", "MAE", "Rsquared", "selected_params"});
    for (const auto& f : a.cv.folds) {
        s.add({std::to_string(f.fold), f.label, std::to_string(f.metrics.n), fmt(f.metrics.rmse),
               fmt(f.metrics.mae), fmt(f.metrics.r2), describe(f.selected)});
    }
    const auto& m = a.cv.summary;
    const auto stat = [](const MetricStat& st, bool sd) { return st.count ? fmt(sd ? st.sd : st.mean) : "NA"; };
    s.add({"mean", "", std::to_string(m.folds), stat(m.rmse, false), stat(m.mae, false), stat(m.r2, false), ""});
    s.add({"sd", "", std::to_string(m.folds), stat(m.rmse, true), stat(m.mae, true), stat(m.r2, true), ""});
    s.add({"pooled", "", std::to_string(a.cv.pooled.n), fmt(a.cv.pooled.rmse), fmt(a.cv.pooled.mae),
           fmt(a.cv.pooled.r2), a.selected_params});
    return s.str();
}

std::string sheet_coefficients(const RunArtifacts& a) {
    Sheet s({"term", "estimate", "std_error", "t_value", "note"});
    if (a.coefficients.empty()) {
        s.add({"", "", "", "", a.coefficient_note.empty() ? std::string(kNoCoefficientsNote) : a.coefficient_note});
    }
    for (const auto& c : a.coefficients) {
        s.add({c.term, fmt(c.estimate), fmt(c.std_error), fmt(c.t_value), a.coefficient_note});
    }
    return s.str();
}

std::string sheet_importance(const RunArtifacts& a) {
    Sheet s({"rank", "feature", "raw", "scaled", "method"});
    for (std::size_t i = 0; i < a.importance.rows.size(); ++i) {
        const auto& r = a.importance.rows[i];
        s.add({std::to_string(i + 1), r.feature, fmt(r.raw), fmt(r.scaled), a.importance.method});
    }
    return s.str();
}

std::string sheet_shap(const RunArtifacts& a) {
    Sheet s({"instance", "row", "feature", "feature_value", "phi", "standard_error", "prediction", "baseline"});
    const auto& sh = a.shap;
    for (Eigen::Index i = 0; i < sh.phi.rows(); ++i) {
        for (std::size_t j = 0; j < sh.features.size(); ++j) {
            const auto c = static_cast<Eigen::Index>(j);
            s.add({std::to_string(i), std::to_string(a.shap_rows[static_cast<std::size_t>(i)]), sh.features[j],
                   fmt(a.shap_feature_values(i, c)), fmt(sh.phi(i, c)), fmt(sh.standard_error(i, c)),
                   fmt(sh.prediction(i)), fmt(sh.baseline)});
        }
    }
    return s.str();
}

std::string sheet_correlations(const RunArtifacts& a) {
    csv::Row header{"variable"};
    header.insert(header.end(), a.correlations.names.begin(), a.correlations.names.end());
    Sheet s(header);
    for (std::size_t i = 0; i < a.correlations.names.size(); ++i) {
        csv::Row row{a.correlations.names[i]};
        for (std::size_t j = 0; j < a.correlations.names.size(); ++j) {
            row.push_back(fmt(a.correlations.r(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))));
        }
        s.add(row);
    }
    return s.str();
}

std::string figure(const RunArtifacts& a, std::string_view name) {
    const std::string model(to_string(a.request.model));
    if (name == "prediction_distribution") {
        std::vector<double> oof(a.cv.oof.data(), a.cv.oof.data() + a.cv.oof.size());
        return svg::histogram(oof, a.prediction, "Cross-validated predictions, " + model, "fibre diameter (nm)");
    }
    if (name == "predicted_vs_observed") {
        return svg::scatter_with_unity(a.observed, a.cv.oof, "Predicted vs observed, " + model);
    }
    if (name == "variable_importance") {
        std::vector<std::string> labels;
        std::vector<double> values;
        for (const auto& r : a.importance.top(20)) {
            labels.push_back(r.feature);
            values.push_back(r.scaled);
        }
        return svg::bar_chart(labels, values, "Variable importance (" + a.importance.method + ")");
    }
    if (name == "shap_summary") {
        std::vector<std::string> features;
        std::vector<std::vector<double>> phi, values;
        const auto& sh = a.shap;
        for (std::size_t k = 0; k < sh.order.size() && k < 6; ++k) {
            const auto j = static_cast<Eigen::Index>(sh.order[k]);
            features.push_back(sh.features[static_cast<std::size_t>(j)]);
            phi.emplace_back(sh.phi.col(j).data(), sh.phi.col(j).data() + sh.phi.rows());
            const Vector v = a.shap_feature_values.col(j);
            values.emplace_back(v.data(), v.data() + v.size());
        }
        return svg::shap_dots(features, phi, values, "SHAP summary (top 6 features)");
    }
    return svg::heatmap(a.correlations.names, a.correlations.r, "Correlation matrix");
}

}  // namespace

std::vector<std::pair<std::string, std::string>> summary_rows(const RunArtifacts& a) {
    const auto& r = a.request;
    const auto& m = a.cv.summary;
    const auto stat = [](const MetricStat& st, bool sd) { return st.count ? fmt(sd ? st.sd : st.mean) : "NA"; };
    std::vector<std::pair<std::string, std::string>> rows = {
        {"run_id", a.run_id},
        {"version", std::string(kVersion)},
        {"dataset_fingerprint", a.dataset_fingerprint},
        {"polymer", r.polymer},
        {"model", std::string(to_string(r.model))},
        {"seed", std::to_string(r.seed)},
        {"collector_type", r.inputs.collector_type},
        {"include_collector", r.include_collector ? "true" : "false"},
    };
    const auto values = r.inputs.values();
    for (std::size_t i = 0; i < kProcessFeatures.size(); ++i) {
        rows.emplace_back(std::string(kProcessFeatures[i]), fmt(values[i]));
    }
    std::vector<double> real = a.distribution.realisations;
    const auto q = [&](double p) { return real.empty() ? std::string("NA") : fmt(quantile(real, p)); };
    const std::vector<std::pair<std::string, std::string>> tail = {
        {"prediction_nm", fmt(a.prediction)},
        {"selected_params", a.selected_params},
        {"rows", std::to_string(a.observed.size())},
        {"studies", std::to_string(a.study_labels.size())},
        {"folds", std::to_string(m.folds)},
        {"RMSE_mean", stat(m.rmse, false)},
        {"RMSE_sd", stat(m.rmse, true)},
        {"MAE_mean", stat(m.mae, false)},
        {"MAE_sd", stat(m.mae, true)},
        {"Rsquared_mean", stat(m.r2, false)},
        {"Rsquared_sd", stat(m.r2, true)},
        {"bootstrap_draws", std::to_string(a.distribution.realisations.size())},
        {"realisation_p05", q(0.05)},
        {"realisation_median", q(0.5)},
        {"realisation_p95", q(0.95)},
        {"out_of_range_count", std::to_string(a.violations.size())},
        {"range_status", range_message(a)},
        {"solvent_recommendation", a.recommendation.sentence()},
        {"top_feature", a.importance.rows.empty() ? "NA" : a.importance.rows.front().feature},
        {"shap_instances", std::to_string(a.shap.phi.rows())},
        {"shap_baseline", a.shap.phi.rows() ? fmt(a.shap.baseline) : "NA"},
        {"warnings", [&] {
             std::string w;
             for (const auto& s : a.warnings) w += (w.empty() ? "" : "; ") + s;
             return w;
         }()},
    };
    rows.insert(rows.end(), tail.begin(), tail.end());
    return rows;
}

std::string render_sheet(const RunArtifacts& a, std::string_view name) {
    if (name == "Summary") return sheet_summary(a);
    if (name == "Out_of_Range") return sheet_out_of_range(a);
    if (name == "CV_Predictions") return sheet_cv_predictions(a);
    if (name == "Prediction_Distribution") return sheet_distribution(a);
    if (name == "Metrics") return sheet_metrics(a);
    if (name == "Coefficients") return sheet_coefficients(a);
    if (name == "Variable_Importance") return sheet_importance(a);
    if (name == "SHAP_Summary") return sheet_shap(a);
    if (name == "Correlation_Matrix") return sheet_correlations(a);
    throw Error(ErrorCode::not_found, "unknown sheet: " + std::string(name));
}

std::string render_manifest(const RunArtifacts& a, const std::vector<zip::Entry>& members) {
    ordered_json m;
    m["format"] = "fibredist.report";
    m["version"] = std::string(kVersion);
    m["run_id"] = a.run_id;
    m["seed"] = a.request.seed;
    m["dataset_fingerprint"] = a.dataset_fingerprint;
    m["created_at"] = a.created_at;
    m["request"] = ordered_json::parse(request_json(a.request));
    ordered_json list = ordered_json::array();
    for (const auto& [path, bytes] : members) {
        list.push_back({{"path", path}, {"sha256", sha256_hex(bytes)}, {"bytes", bytes.size()}});
    }
    m["members"] = list;
    return m.dump(2) + "\n";
}

ReportBundle build_report(const RunArtifacts& a) {
    std::vector<zip::Entry> members;
    for (auto name : kSheetNames) {
        members.emplace_back("sheets/" + std::string(name) + ".csv", render_sheet(a, name));
    }
    for (auto name : kFigureNames) {
        members.emplace_back("figures/" + std::string(name) + ".svg", figure(a, name));
    }
    ReportBundle bundle;
    bundle.members.emplace_back("manifest.json", render_manifest(a, members));
    bundle.members.insert(bundle.members.end(), members.begin(), members.end());
    return bundle;
}

const std::string* ReportBundle::find(std::string_view path) const {
    for (const auto& [p, bytes] : members) {
        if (p == path) return &bytes;
    }
    return nullptr;
}

const std::string& ReportBundle::sheet(std::string_view name) const {
    const std::string* s = find("sheets/" + std::string(name) + ".csv");
    if (!s) throw Error(ErrorCode::not_found, "sheet not in bundle: " + std::string(name));
    return *s;
}

std::string ReportBundle::archive() const { return zip::write(members); }

void write_bundle(const ReportBundle& bundle, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::io_error, "cannot open for writing: " + path.string());
    const std::string bytes = bundle.archive();
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::io_error, "write failed: " + path.string());
}

ReportBundle read_bundle(std::string_view archive) {
    ReportBundle bundle;
    bundle.members = zip::read(archive);
    const std::string* manifest_text = bundle.find("manifest.json");
    if (!manifest_text) throw Error(ErrorCode::io_error, "bundle has no manifest.json");
    ordered_json manifest;
    try {
        manifest = ordered_json::parse(*manifest_text);
    } catch (const std::exception& e) {
        throw Error(ErrorCode::io_error, std::string("manifest.json is not valid JSON: ") + e.what());
    }
    std::set<std::string> listed;
    for (const auto& m : manifest.at("members")) {
        const auto path = m.at("path").get<std::string>();
        const std::string* bytes = bundle.find(path);
        if (!bytes) throw Error(ErrorCode::io_error, "manifest lists a missing member: " + path);
        if (bytes->size() != m.at("bytes").get<std::size_t>() || sha256_hex(*bytes) != m.at("sha256").get<std::string>()) {
            throw Error(ErrorCode::io_error, "hash mismatch for member: " + path);
        }
        listed.insert(path);
    }
    for (const auto& [path, bytes] : bundle.members) {
        if (path != "manifest.json" && !listed.count(path)) {
            throw Error(ErrorCode::io_error, "member not listed in manifest: " + path);
        }
    }
    return bundle;
}

ReportBundle read_bundle_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::io_error, "cannot open bundle: " + path.string());
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return read_bundle(bytes);
}

std::string result_json(const RunArtifacts& a) {
    ordered_json j;
    j["run_id"] = a.run_id;
    j["version"] = std::string(kVersion);
    j["seed"] = a.request.seed;
    j["dataset_fingerprint"] = a.dataset_fingerprint;
    j["request"] = ordered_json::parse(request_json(a.request));
    j["prediction"] = jnum(a.prediction);
    j["selected_params"] = a.selected_params;
    j["features"] = a.feature_names;

    const auto& d = a.distribution;
    j["distribution"] = {{"point", jnum(d.point)},
                         {"realisations", jvec(d.realisations)},
                         {"draws", jvec(d.draws)},
                         {"draw_index", d.draw_index}};

    const auto stat = [](const MetricStat& s) {
        return ordered_json{{"mean", s.count ? jnum(s.mean) : ordered_json(nullptr)},
                            {"sd", s.count > 1 ? jnum(s.sd) : ordered_json(nullptr)}};
    };
    ordered_json folds = ordered_json::array();
    for (const auto& f : a.cv.folds) {
        folds.push_back({{"fold", f.fold},
                         {"label", f.label},
                         {"n", f.metrics.n},
                         {"RMSE", jnum(f.metrics.rmse)},
                         {"MAE", jnum(f.metrics.mae)},
                         {"Rsquared", jnum(f.metrics.r2)},
                         {"selected_params", describe(f.selected)}});
    }
    j["metrics"] = {{"summary",
                     {{"RMSE", stat(a.cv.summary.rmse)},
                      {"MAE", stat(a.cv.summary.mae)},
                      {"Rsquared", stat(a.cv.summary.r2)},
                      {"folds", a.cv.summary.folds}}},
                    {"pooled",
                     {{"RMSE", jnum(a.cv.pooled.rmse)},
                      {"MAE", jnum(a.cv.pooled.mae)},
                      {"Rsquared", jnum(a.cv.pooled.r2)}}},
                    {"folds", folds}};

    ordered_json study = ordered_json::array();
    for (int s : a.study_of_row) study.push_back(a.study_labels[static_cast<std::size_t>(s)]);
    j["oof"] = {{"observed", jvec(a.observed)},
                {"predicted", jvec(a.cv.oof)},
                {"study", study},
                {"fold", a.cv.fold_of_row}};

    ordered_json coef = ordered_json::array();
    for (const auto& c : a.coefficients) {
        coef.push_back({{"term", c.term},
                        {"estimate", jnum(c.estimate)},
                        {"std_error", jnum(c.std_error)},
                        {"t_value", jnum(c.t_value)}});
    }
    j["coefficients"] = {{"available", !a.coefficients.empty()},
                         {"note", a.coefficients.empty() && a.coefficient_note.empty()
                                      ? std::string(kNoCoefficientsNote)
                                      : a.coefficient_note},
                         {"rows", coef}};

    ordered_json imp = ordered_json::array();
    for (const auto& r : a.importance.rows) {
        imp.push_back({{"feature", r.feature}, {"raw", jnum(r.raw)}, {"scaled", jnum(r.scaled)}});
    }
    j["importance"] = {{"method", a.importance.method}, {"rows", imp}};

    const auto& sh = a.shap;
    ordered_json shap_rows = ordered_json::array();
    for (Eigen::Index i = 0; i < sh.phi.rows(); ++i) {
        shap_rows.push_back({{"row", a.shap_rows[static_cast<std::size_t>(i)]},
                             {"prediction", jnum(sh.prediction(i))},
                             {"phi", jvec(Vector(sh.phi.row(i).transpose()))},
                             {"standard_error", jvec(Vector(sh.standard_error.row(i).transpose()))},
                             {"feature_values", jvec(Vector(a.shap_feature_values.row(i).transpose()))}});
    }
    j["shap"] = {{"features", sh.features},
                 {"baseline", jnum(sh.baseline)},
                 {"sims", sh.sims},
                 {"background_rows", sh.background_rows},
                 {"mean_abs", jvec(sh.mean_abs)},
                 {"order", sh.order},
                 {"rows", shap_rows}};

    ordered_json r = ordered_json::array();
    for (Eigen::Index i = 0; i < a.correlations.r.rows(); ++i) r.push_back(jvec(Vector(a.correlations.r.row(i).transpose())));
    j["correlations"] = {{"names", a.correlations.names},
                         {"r", r},
                         {"excluded_zero_variance", a.correlations.excluded_zero_variance}};

    const auto& rec = a.recommendation;
    j["recommendation"] = {{"solvents", rec.solvents},
                           {"median_ratios", rec.median_ratios},
                           {"support", rec.support},
                           {"sentence", rec.sentence()}};

    ordered_json ranges = ordered_json::array();
    for (const auto& f : a.range.features) {
        ranges.push_back({{"feature", f.feature}, {"min", jnum(f.min)}, {"max", jnum(f.max)}});
    }
    ordered_json violations = ordered_json::array();
    for (const auto& v : a.violations) {
        violations.push_back({{"feature", v.feature}, {"value", jnum(v.value)}, {"min", jnum(v.min)}, {"max", jnum(v.max)}});
    }
    j["range"] = {{"features", ranges}, {"violations", violations}, {"message", range_message(a)}};
    j["warnings"] = a.warnings;
    return j.dump();
}

}  // namespace fibredist
