#include <atomic>
#include <thread>

#include "doctest.h"
#include "fibredist/http_api.hpp"
#include "fibredist/report.hpp"
#include "helpers.hpp"
#include "httplib.h"
#include "json.hpp"

using namespace fibredist;
using nlohmann::json;

namespace {

std::vector<StudyRecord> two_polymers() {
    SyntheticConfig a;
    a.n_studies = 10;
    a.rows_per_study = 8;
    auto recs = generate_synthetic(a).records;
    SyntheticConfig b = a;
    b.polymer = "PVA";
    b.seed = 5;
    b.n_studies = 6;
    for (auto& r : generate_synthetic(b).records) recs.push_back(r);
    return recs;
}

RunRequest request(ModelKind kind = ModelKind::knn, std::uint64_t seed = 42) {
    RunRequest r;
    r.polymer = "SYN";
    r.model = kind;
    r.seed = seed;
    r.inputs = ProcessInputs::from_values({12, 21, 300, 17, 1.0, 15});
    r.shap_sims = 5;
    return r;
}

std::string request_body(std::uint64_t seed = 42) { return request_json(request(ModelKind::knn, seed)); }

}  // namespace

TEST_CASE("pipeline produces complete artifacts") {
    const auto recs = two_polymers();
    std::vector<std::string> stages;
    PipelineOptions o;
    o.on_stage = [&](std::string_view s) { stages.emplace_back(s); };
    const RunArtifacts a = run_pipeline(recs, dataset_fingerprint(recs), request(), o);
    CHECK(a.observed.size() == 80);
    CHECK(a.cv.oof.size() == 80);
    for (Eigen::Index i = 0; i < a.cv.oof.size(); ++i) CHECK(std::isfinite(a.cv.oof(i)));
    CHECK(a.cv.folds.size() == 10);
    CHECK(a.distribution.realisations.size() == 100);
    CHECK(std::isfinite(a.prediction));
    CHECK(a.run_id == make_run_id(request(), dataset_fingerprint(recs)));
    CHECK(a.run_id.size() == 16);
    CHECK(a.violations.empty());
    CHECK(stages == std::vector<std::string>{"subset", "nested_cv", "final_fit", "predict", "residual_bootstrap",
                                             "importance", "shap", "correlations", "recommendation", "range_check"});
}

TEST_CASE("out-of-range inputs still produce a prediction with a warning") {
    const auto recs = two_polymers();
    RunRequest r = request();
    r.inputs.voltage = 90;
    r.inputs.distance = 1;
    const RunArtifacts a = run_pipeline(recs, dataset_fingerprint(recs), r);
    CHECK(a.violations.size() == 2);
    CHECK(std::isfinite(a.prediction));
    const auto rows = summary_rows(a);
    bool found = false;
    for (const auto& [k, v] : rows) {
        if (k == "out_of_range_count") found = v == "2";
    }
    CHECK(found);
}

TEST_CASE("pipeline failures name the stage") {
    const auto recs = two_polymers();
    RunRequest r = request();
    r.polymer = "NOPE";
    try {
        run_pipeline(recs, "fp", r);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::unknown_polymer);
        CHECK(std::string(e.what()).rfind("subset", 0) == 0);
    }
}

TEST_CASE("request parsing") {
    const RunRequest r = parse_run_request(request_body(7));
    CHECK(r.seed == 7);
    CHECK(r.model == ModelKind::knn);
    CHECK(request_json(r) == request_body(7));
    const RunRequest flat = parse_run_request(
        R"({"polymer":"SYN","model":"forest","concentration":"12 %","needle_diameter":21,"rotation_speed":0,)"
        R"("voltage":15,"flow_rate":"0,5","distance":10})");
    CHECK(flat.seed == 42);
    CHECK(flat.model == ModelKind::forest);
    CHECK(flat.inputs.concentration == 12);
    CHECK(flat.inputs.flow_rate == 0.5);
    CHECK_THROWS_AS_CODE(parse_run_request("not json"), ErrorCode::invalid_argument);
    CHECK_THROWS_AS_CODE(parse_run_request("[]"), ErrorCode::invalid_argument);
    CHECK_THROWS_AS_CODE(parse_run_request(R"({"polymer":"SYN"})"), ErrorCode::invalid_argument);
    CHECK_THROWS_AS_CODE(parse_run_request(R"({"model":"KNN","inputs":{"concentration":1}})"),
                         ErrorCode::invalid_argument);
    CHECK_THROWS_AS_CODE(parse_run_request(R"({"model":"BOOSTING"})"), ErrorCode::invalid_argument);
    RunRequest bad = request();
    bad.bootstrap_draws = 0;
    CHECK_THROWS_AS_CODE(bad.validate(), ErrorCode::invalid_argument);
    bad = request();
    bad.inputs.voltage = -1;
    CHECK_THROWS_AS_CODE(bad.validate(), ErrorCode::invalid_argument);
}

TEST_CASE("service caches runs by id") {
    RunService service(two_polymers(), 2);
    const std::string id = service.submit(request());
    CHECK(service.submit(request()) == id);
    CHECK(service.wait(id).state == RunState::done);
    const auto first = service.result(id);
    const auto again = service.run_sync(request());
    CHECK(first.get() == again.get());
    CHECK(service.executed_runs() == 1);
    CHECK(service.status(id).message == "RESULTS IN PREDICTION & METRICS TAB");
    CHECK_THROWS_AS_CODE(service.status("0000000000000000"), ErrorCode::not_found);
    CHECK_THROWS_AS_CODE(service.result("0000000000000000"), ErrorCode::not_found);
}

TEST_CASE("failed runs keep their error") {
    RunService service(two_polymers(), 1);
    RunRequest r = request();
    r.polymer = "NOPE";
    const std::string id = service.submit(r);
    const RunStatus s = service.wait(id);
    CHECK(s.state == RunState::failed);
    CHECK(s.error_code == "unknown_polymer");
    CHECK_THROWS_AS_CODE(service.result(id), ErrorCode::unknown_polymer);
}

TEST_CASE("concurrent submissions each run once") {
    RunService service(two_polymers(), 3);
    std::vector<std::thread> threads;
    std::vector<std::string> ids(8);
    for (int t = 0; t < 8; ++t) {
        threads.emplace_back([&, t] { ids[static_cast<std::size_t>(t)] = service.submit(request(ModelKind::knn, 100 + t % 4)); });
    }
    for (auto& th : threads) th.join();
    for (const auto& id : ids) CHECK(service.wait(id).state == RunState::done);
    CHECK(service.executed_runs() == 4);
    for (int t = 0; t < 4; ++t) CHECK(ids[static_cast<std::size_t>(t)] == ids[static_cast<std::size_t>(t + 4)]);
}

TEST_CASE("reload leaves finished runs intact") {
    auto recs = two_polymers();
    RunService service(recs, 1);
    const std::string before = service.fingerprint();
    const auto a = service.run_sync(request());
    recs.pop_back();
    service.reload(recs);
    CHECK(service.fingerprint() != before);
    CHECK(service.result(a->run_id)->dataset_fingerprint == before);
    CHECK(service.run_sync(request())->run_id != a->run_id);
}

TEST_CASE("capabilities and range") {
    RunService service(two_polymers(), 1);
    const Capabilities c = service.capabilities();
    CHECK(c.polymers == std::vector<std::string>{"PVA", "SYN"});
    CHECK(c.models.size() == 7);
    CHECK(c.rows == 80 + 48);
    const auto j = json::parse(capabilities_json(c));
    CHECK(j["models_label"].get<std::string>().rfind("Available models on this server: ", 0) == 0);
    const RangeSummary r = service.range("SYN");
    CHECK(r.features.size() == 6);
    CHECK_THROWS_AS_CODE(service.range("NOPE"), ErrorCode::unknown_polymer);
}

TEST_CASE("API dispatcher routes and errors") {
    RunService service(two_polymers(), 1);
    auto call = [&](const std::string& method, const std::string& path, const std::string& body = {}) {
        return handle_api(service, method, path, body);
    };
    CHECK(call("GET", "/api/capabilities").status == 200);
    const ApiResponse range = call("GET", "/api/range/SYN");
    CHECK(range.status == 200);
    CHECK(json::parse(range.body)["features"].size() == 6);
    CHECK(call("GET", "/api/range/NOPE").status == 404);

    const ApiResponse submitted = call("POST", "/api/runs", request_body());
    CHECK(submitted.status == 202);
    const std::string id = json::parse(submitted.body)["run_id"];
    const ApiResponse early = call("GET", "/api/runs/" + id + "/result");
    CHECK((early.status == 409 || early.status == 200));
    if (early.status == 409) CHECK(json::parse(early.body)["error"]["code"] == "not_ready");
    service.wait(id);
    const auto status = json::parse(call("GET", "/api/runs/" + id + "/status").body);
    CHECK(status["state"] == "DONE");
    const ApiResponse result = call("GET", "/api/runs/" + id + "/result");
    CHECK(result.status == 200);
    CHECK(json::parse(result.body)["run_id"] == id);
    const ApiResponse report = call("GET", "/api/runs/" + id + "/report");
    CHECK(report.status == 200);
    CHECK(report.content_type == "application/zip");
    CHECK(report.filename == "fibredist_" + id + ".zip");
    CHECK(read_bundle(report.body).members.size() == 15);

    const ApiResponse bad = call("POST", "/api/runs", "{\"model\":\"KNN\"}");
    CHECK(bad.status == 400);
    const auto err = json::parse(bad.body);
    CHECK(err["error"]["code"] == "invalid_argument");
    CHECK(err["error"]["message"].get<std::string>().find("concentration") != std::string::npos);
    CHECK(call("GET", "/api/runs/abcdef0123456789/status").status == 404);
    CHECK(call("GET", "/api/nothing").status == 404);
    CHECK(call("POST", "/api/admin/reload").status == 404);

    RunRequest failing = request();
    failing.polymer = "NOPE";
    const std::string fid = json::parse(call("POST", "/api/runs", request_json(failing)).body)["run_id"];
    service.wait(fid);
    const ApiResponse failed = call("GET", "/api/runs/" + fid + "/result");
    CHECK(failed.status == 422);
    CHECK(json::parse(failed.body)["error"]["code"] == "unknown_polymer");

    const ApiResponse cmp = call("POST", "/api/compare", R"({"a":[1,2,3,4,5],"b":[2,3,4,5,6,7]})");
    CHECK(cmp.status == 200);
    CHECK(json::parse(cmp.body).contains("ks"));
    CHECK(call("POST", "/api/compare", R"({"a":[1,"x"],"b":[1]})").status == 400);
}

TEST_CASE("reload endpoint swaps the dataset") {
    RunService service(two_polymers(), 1);
    const std::string before = service.fingerprint();
    DatasetLoader loader = [] {
        auto recs = two_polymers();
        recs.resize(100);
        return recs;
    };
    const ApiResponse r = handle_api(service, "POST", "/api/admin/reload", "", loader);
    CHECK(r.status == 200);
    CHECK(json::parse(r.body)["dataset_fingerprint"] != before);
}

TEST_CASE("HTTP status mapping") {
    CHECK(http_status_for(ErrorCode::invalid_argument) == 400);
    CHECK(http_status_for(ErrorCode::missing_columns) == 400);
    CHECK(http_status_for(ErrorCode::unknown_polymer) == 404);
    CHECK(http_status_for(ErrorCode::insufficient_studies) == 422);
    CHECK(http_status_for(ErrorCode::degenerate_data) == 422);
    CHECK(http_status_for(ErrorCode::internal) == 500);
}

TEST_CASE("HTTP server over a real socket") {
    RunService service(two_polymers(), 1);
    HttpServer server(service);
    const int port = server.bind("127.0.0.1", 0);
    REQUIRE(port > 0);
    std::thread listener([&] { server.listen(); });
    httplib::Client client("127.0.0.1", port);
    client.set_read_timeout(60, 0);

    auto caps = client.Get("/api/capabilities");
    REQUIRE(caps);
    CHECK(caps->status == 200);
    CHECK(caps->get_header_value("Access-Control-Allow-Origin") == "*");
    auto posted = client.Post("/api/runs", request_body(9), "application/json");
    REQUIRE(posted);
    CHECK(posted->status == 202);
    const std::string id = json::parse(posted->body)["run_id"];
    std::string state;
    for (int i = 0; i < 600 && state != "DONE" && state != "FAILED"; ++i) {
        auto st = client.Get("/api/runs/" + id + "/status");
        REQUIRE(st);
        state = json::parse(st->body)["state"];
        if (state != "DONE") std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
    CHECK(state == "DONE");
    auto report = client.Get("/api/runs/" + id + "/report");
    REQUIRE(report);
    CHECK(report->status == 200);
    CHECK(report->get_header_value("Content-Disposition").find("fibredist_" + id + ".zip") != std::string::npos);
    CHECK(read_bundle(report->body).members.size() == 15);
    auto missing = client.Get("/api/runs/0123456789abcdef/result");
    REQUIRE(missing);
    CHECK(missing->status == 404);

    server.stop();
    listener.join();
}
