#include <map>
#include <sstream>

#include "json.hpp"

#include "doctest.h"
#include "fibredist/csv.hpp"
#include "fibredist/hash.hpp"
#include "fibredist/pipeline.hpp"
#include "fibredist/report.hpp"
#include "helpers.hpp"

using namespace fibredist;

namespace {

const std::vector<StudyRecord>& small_records() {
    static const std::vector<StudyRecord> records = [] {
        SyntheticConfig c;
        c.n_studies = 12;
        c.rows_per_study = 10;
        return generate_synthetic(c).records;
    }();
    return records;
}

RunRequest small_request(ModelKind kind, std::uint64_t seed = 42) {
    RunRequest r;
    r.polymer = "SYN";
    r.model = kind;
    r.seed = seed;
    r.inputs = ProcessInputs::from_values({12, 21, 300, 17, 1.0, 15});
    r.bootstrap_draws = 100;
    r.shap_sims = 10;
    return r;
}

RunArtifacts run(ModelKind kind, std::uint64_t seed = 42) {
    PipelineOptions o;
    o.created_at = "2026-01-01T00:00:00Z";
    const auto& recs = small_records();
    return run_pipeline(recs, dataset_fingerprint(recs), small_request(kind, seed), o);
}

const RunArtifacts& knn_run() {
    static const RunArtifacts a = run(ModelKind::knn);
    return a;
}

const RunArtifacts& linear_run() {
    static const RunArtifacts a = run(ModelKind::linear);
    return a;
}

std::vector<csv::Row> parse(const std::string& text) {
    std::istringstream in(text);
    return csv::read_all(in, ',');
}

std::map<std::string, std::string> summary_map(const ReportBundle& b) {
    std::map<std::string, std::string> out;
    const auto rows = parse(b.sheet("Summary"));
    for (std::size_t i = 1; i < rows.size(); ++i) out[rows[i].at(0)] = rows[i].at(1);
    return out;
}

}  // namespace

TEST_CASE("bundle holds every sheet and figure with fixed headers") {
    const ReportBundle b = build_report(knn_run());
    REQUIRE(b.members.size() == 1 + kSheetNames.size() + kFigureNames.size());
    CHECK(b.members[0].first == "manifest.json");
    for (std::size_t i = 0; i < kSheetNames.size(); ++i) {
        CHECK(b.members[1 + i].first == "sheets/" + std::string(kSheetNames[i]) + ".csv");
    }
    for (std::size_t i = 0; i < kFigureNames.size(); ++i) {
        const auto& m = b.members[1 + kSheetNames.size() + i];
        CHECK(m.first == "figures/" + std::string(kFigureNames[i]) + ".svg");
        CHECK(m.second.rfind("<svg", 0) == 0);
    }
    const std::map<std::string, std::string> headers = {
        {"Summary", "key,value"},
        {"Out_of_Range", "feature,value,min,max,within_range"},
        {"CV_Predictions", "row,study,fold,observed,predicted,residual"},
        {"Prediction_Distribution", "draw,pool_row,residual,point,realisation"},
        {"Metrics", "fold,label,n,RMSE,MAE,Rsquared,selected_params"},
        {"Coefficients", "term,estimate,std_error,t_value,note"},
        {"Variable_Importance", "rank,feature,raw,scaled,method"},
        {"SHAP_Summary", "instance,row,feature,feature_value,phi,standard_error,prediction,baseline"},
    };
    for (const auto& [sheet, header] : headers) {
        const std::string& text = b.sheet(sheet);
        CHECK_MESSAGE(text.substr(0, text.find('\n')) == header, sheet);
    }
    const auto corr = parse(b.sheet("Correlation_Matrix"));
    CHECK(corr[0][0] == "variable");
    CHECK(corr.size() == corr[0].size());
    CHECK_THROWS_AS_CODE(b.sheet("Nope"), ErrorCode::not_found);
}

TEST_CASE("row counts agree with the artifacts") {
    const RunArtifacts& a = knn_run();
    const ReportBundle b = build_report(a);
    CHECK(parse(b.sheet("CV_Predictions")).size() == 1 + static_cast<std::size_t>(a.observed.size()));
    CHECK(parse(b.sheet("Prediction_Distribution")).size() == 101);
    CHECK(parse(b.sheet("Out_of_Range")).size() == 7);
    CHECK(parse(b.sheet("Metrics")).size() == 1 + a.cv.folds.size() + 3);
    CHECK(parse(b.sheet("SHAP_Summary")).size() ==
          1 + static_cast<std::size_t>(a.shap.phi.rows() * a.shap.phi.cols()));
    CHECK(parse(b.sheet("Variable_Importance")).size() == 1 + a.importance.rows.size());
}

TEST_CASE("coefficients exist only for transparent learners") {
    const auto lin = parse(build_report(linear_run()).sheet("Coefficients"));
    REQUIRE(lin.size() == 1 + 1 + linear_run().feature_names.size());
    CHECK(lin[1][0] == "(Intercept)");
    for (std::size_t i = 1; i < lin.size(); ++i) {
        CHECK(lin[i][2] != "NA");
        CHECK(std::stod(lin[i][3]) == doctest::Approx(std::stod(lin[i][1]) / std::stod(lin[i][2])).epsilon(1e-9));
    }
    const auto knn = parse(build_report(knn_run()).sheet("Coefficients"));
    REQUIRE(knn.size() == 2);
    CHECK(knn[1][4].find(kNoCoefficientsNote) != std::string::npos);
}

TEST_CASE("summary agrees with the other sheets") {
    const RunArtifacts& a = knn_run();
    const ReportBundle b = build_report(a);
    auto s = summary_map(b);
    const auto metrics = parse(b.sheet("Metrics"));
    const auto find_label = [&](const std::string& label) {
        for (const auto& r : metrics) {
            if (r[0] == label) return r;
        }
        FAIL("missing metrics row " << label);
        return csv::Row{};
    };
    const auto mean = find_label("mean");
    const auto sd = find_label("sd");
    CHECK(s["RMSE_mean"] == mean[3]);
    CHECK(s["MAE_mean"] == mean[4]);
    CHECK(s["Rsquared_mean"] == mean[5]);
    CHECK(s["Rsquared_sd"] == sd[5]);
    CHECK(s["folds"] == std::to_string(a.cv.folds.size()));
    CHECK(s["rows"] == std::to_string(parse(b.sheet("CV_Predictions")).size() - 1));
    CHECK(s["top_feature"] == parse(b.sheet("Variable_Importance"))[1][1]);
    CHECK(s["bootstrap_draws"] == "100");
    CHECK(s["run_id"] == a.run_id);
    CHECK(s["model"] == "KNN");

    const auto dist = parse(b.sheet("Prediction_Distribution"));
    std::vector<double> real;
    for (std::size_t i = 1; i < dist.size(); ++i) {
        CHECK(std::stod(dist[i][3]) == a.prediction);
        CHECK(std::stod(dist[i][4]) == std::stod(dist[i][3]) + std::stod(dist[i][2]));
        real.push_back(std::stod(dist[i][4]));
    }
    CHECK(std::stod(s["realisation_median"]) == doctest::Approx(quantile(real, 0.5)).epsilon(1e-12));
    CHECK(std::stod(s["prediction_nm"]) == a.prediction);

    // residual pool rows point into the OOF sheet
    const auto cvp = parse(b.sheet("CV_Predictions"));
    for (std::size_t i = 1; i < dist.size(); ++i) {
        const auto row = std::stoul(dist[i][1]);
        CHECK(cvp.at(1 + row)[5] == dist[i][2]);
    }
}

TEST_CASE("identical requests produce byte-identical bundles") {
    const std::string first = build_report(knn_run()).archive();
    const std::string second = build_report(run(ModelKind::knn)).archive();
    CHECK(first == second);
    CHECK(sha256_hex(first) == sha256_hex(second));
}

TEST_CASE("a different seed changes the stochastic sheets but not the data summary") {
    const ReportBundle a = build_report(knn_run());
    const ReportBundle b = build_report(run(ModelKind::knn, 43));
    CHECK(a.sheet("Prediction_Distribution") != b.sheet("Prediction_Distribution"));
    CHECK(a.sheet("Out_of_Range") == b.sheet("Out_of_Range"));
    CHECK(a.sheet("Correlation_Matrix") == b.sheet("Correlation_Matrix"));
    CHECK(summary_map(a)["run_id"] != summary_map(b)["run_id"]);
}

TEST_CASE("archives round-trip and tampering is detected") {
    const ReportBundle b = build_report(knn_run());
    const std::string archive = b.archive();
    const ReportBundle back = read_bundle(archive);
    REQUIRE(back.members.size() == b.members.size());
    for (std::size_t i = 0; i < b.members.size(); ++i) CHECK(back.members[i] == b.members[i]);

    const auto manifest = nlohmann::json::parse(*b.find("manifest.json"));
    CHECK(manifest["format"] == "fibredist.report");
    CHECK(manifest["run_id"] == knn_run().run_id);
    CHECK(manifest["created_at"] == "2026-01-01T00:00:00Z");
    CHECK(manifest["members"].size() == b.members.size() - 1);
    for (const auto& m : manifest["members"]) {
        const std::string* body = b.find(m["path"].get<std::string>());
        REQUIRE(body);
        CHECK(m["sha256"] == sha256_hex(*body));
        CHECK(m["bytes"] == body->size());
    }

    // flip one byte inside a sheet and rebuild the archive with correct CRCs
    auto members = b.members;
    members[3].second[members[3].second.size() / 2] ^= 0x01;
    CHECK_THROWS_AS_CODE(read_bundle(zip::write(members)), ErrorCode::io_error);
    // an unlisted extra member
    members = b.members;
    members.emplace_back("extra.txt", "x");
    CHECK_THROWS_AS_CODE(read_bundle(zip::write(members)), ErrorCode::io_error);
    // a missing member
    members = b.members;
    members.pop_back();
    CHECK_THROWS_AS_CODE(read_bundle(zip::write(members)), ErrorCode::io_error);
    // corrupted archive bytes fail the CRC
    std::string broken = archive;
    broken[200] ^= 0x55;
    CHECK_THROWS(read_bundle(broken));
}

TEST_CASE("bundle files are written and read back") {
    const auto path = std::filesystem::temp_directory_path() / "fibredist_report_test.zip";
    const ReportBundle b = build_report(linear_run());
    write_bundle(b, path);
    const ReportBundle back = read_bundle_file(path);
    CHECK(back.archive() == b.archive());
    std::filesystem::remove(path);
    CHECK_THROWS_AS_CODE(read_bundle_file(path), ErrorCode::io_error);
}

TEST_CASE("empty artifacts render placeholders instead of failing") {
    RunArtifacts empty;
    empty.request.polymer = "X";
    const ReportBundle b = build_report(empty);
    CHECK(b.members.size() == 15);
    for (std::string_view f : kFigureNames) {
        const std::string* svg = b.find("figures/" + std::string(f) + ".svg");
        REQUIRE(svg);
        CHECK(svg->find("no ") != std::string::npos);
    }
    CHECK(parse(b.sheet("CV_Predictions")).size() == 1);
    CHECK(summary_map(b)["realisation_median"] == "NA");
}

TEST_CASE("result JSON mirrors the artifacts") {
    const RunArtifacts& a = knn_run();
    const auto j = nlohmann::json::parse(result_json(a));
    for (const char* key : {"run_id", "version", "seed", "dataset_fingerprint", "request", "prediction",
                            "selected_params", "features", "distribution", "metrics", "oof", "coefficients",
                            "importance", "shap", "correlations", "recommendation", "range", "warnings"}) {
        CHECK_MESSAGE(j.contains(key), key);
    }
    CHECK(j["prediction"].get<double>() == a.prediction);
    CHECK(j["distribution"]["realisations"].size() == 100);
    CHECK(j["oof"]["predicted"].size() == static_cast<std::size_t>(a.observed.size()));
    CHECK(j["metrics"]["folds"].size() == a.cv.folds.size());
    CHECK(j["coefficients"]["available"] == false);
    CHECK(j["shap"]["rows"].size() == static_cast<std::size_t>(a.shap.phi.rows()));
    CHECK(j["request"]["model"] == "KNN");
    CHECK(j["range"]["features"].size() == 6);
    CHECK(parse_run_request(j["request"].dump()).seed == 42);
}
