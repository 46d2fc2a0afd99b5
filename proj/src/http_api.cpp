#include "fibredist/http_api.hpp"

#include <regex>

#include "fibredist/report.hpp"
#include "httplib.h"
#include "json.hpp"

namespace fibredist {

using nlohmann::ordered_json;

int http_status_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::invalid_argument:
        case ErrorCode::missing_columns:
        case ErrorCode::missing_feature: return 400;
        case ErrorCode::unknown_polymer:
        case ErrorCode::not_found: return 404;
        case ErrorCode::insufficient_studies:
        case ErrorCode::degenerate_data:
        case ErrorCode::not_converged: return 422;
        case ErrorCode::io_error:
        case ErrorCode::internal: return 500;
    }
    return 500;
}

std::string error_json(std::string_view code, std::string_view message) {
    ordered_json j;
    j["error"] = {{"code", std::string(code)}, {"message", std::string(message)}};
    return j.dump();
}

namespace {

ApiResponse json_response(int status, std::string body) { return {status, "application/json", std::move(body), {}}; }

ApiResponse error_response(int status, std::string_view code, std::string_view message) {
    return json_response(status, error_json(code, message));
}

std::vector<double> number_array(const ordered_json& j, const char* name) {
    if (!j.contains(name) || !j.at(name).is_array()) {
        throw Error(ErrorCode::invalid_argument, std::string("expected a numeric array field: ") + name);
    }
    std::vector<double> out;
    for (const auto& v : j.at(name)) {
        if (!v.is_number()) throw Error(ErrorCode::invalid_argument, std::string("non-numeric value in ") + name);
        out.push_back(v.get<double>());
    }
    return out;
}

ApiResponse dispatch(RunService& service, const std::string& method, const std::string& path, const std::string& body,
                     const DatasetLoader& loader) {
    static const std::regex range_re("^/api/range/([^/]+)$");
    static const std::regex run_re("^/api/runs/([0-9a-f]+)/(status|result|report)$");
    std::smatch m;

    if (method == "GET" && path == "/api/capabilities") {
        return json_response(200, capabilities_json(service.capabilities()));
    }
    if (method == "GET" && std::regex_match(path, m, range_re)) {
        const std::string polymer = httplib::detail::decode_url(m[1].str(), false);
        const RangeSummary range = service.range(polymer);
        ordered_json features = ordered_json::array();
        for (const auto& f : range.features) features.push_back({{"feature", f.feature}, {"min", f.min}, {"max", f.max}});
        return json_response(200, ordered_json{{"polymer", polymer}, {"features", features}}.dump());
    }
    if (method == "POST" && path == "/api/runs") {
        const std::string id = service.submit(parse_run_request(body));
        const RunStatus status = service.status(id);
        return json_response(202, ordered_json{{"run_id", id}, {"state", std::string(to_string(status.state))}}.dump());
    }
    if (method == "GET" && std::regex_match(path, m, run_re)) {
        const std::string id = m[1].str();
        const std::string what = m[2].str();
        const RunStatus status = service.status(id);
        if (what == "status") return json_response(200, status_json(status));
        if (status.state == RunState::failed) {
            return error_response(422, status.error_code.empty() ? "internal" : status.error_code, status.message);
        }
        if (status.state != RunState::done) {
            return error_response(409, "not_ready", "run " + id + " is " + std::string(to_string(status.state)));
        }
        const auto artifacts = service.result(id);
        if (what == "result") return json_response(200, result_json(*artifacts));
        return {200, "application/zip", build_report(*artifacts).archive(), "fibredist_" + id + ".zip"};
    }
    if (method == "POST" && path == "/api/compare") {
        ordered_json j;
        try {
            j = ordered_json::parse(body);
        } catch (const std::exception& e) {
            throw Error(ErrorCode::invalid_argument, std::string("body is not valid JSON: ") + e.what());
        }
        if (!j.is_object()) throw Error(ErrorCode::invalid_argument, "body must be a JSON object");
        return json_response(200, comparison_json(compare_distributions(number_array(j, "a"), number_array(j, "b"))));
    }
    if (method == "POST" && path == "/api/admin/reload") {
        if (!loader) return error_response(404, "not_found", "reload is not enabled on this server");
        service.reload(loader());
        return json_response(200, ordered_json{{"dataset_fingerprint", service.fingerprint()}}.dump());
    }
    return error_response(404, "not_found", "no route for " + method + " " + path);
}

}  // namespace

ApiResponse handle_api(RunService& service, const std::string& method, const std::string& path,
                       const std::string& body, const DatasetLoader& loader) {
    try {
        return dispatch(service, method, path, body, loader);
    } catch (const Error& e) {
        return error_response(http_status_for(e.code()), to_string(e.code()), e.what());
    } catch (const std::exception& e) {
        return error_response(500, "internal", e.what());
    }
}

struct HttpServer::Impl {
    Impl(RunService& s, DatasetLoader l) : service(s), loader(std::move(l)) {}
    RunService& service;
    DatasetLoader loader;
    httplib::Server server;
};

HttpServer::HttpServer(RunService& service, DatasetLoader loader)
    : impl_(std::make_unique<Impl>(service, std::move(loader))) {
    auto handler = [this](const httplib::Request& req, httplib::Response& res) {
        const ApiResponse r = handle_api(impl_->service, req.method, req.path, req.body, impl_->loader);
        res.status = r.status;
        if (!r.filename.empty()) {
            res.set_header("Content-Disposition", "attachment; filename=\"" + r.filename + "\"");
        }
        res.set_content(r.body, r.content_type);
    };
    auto& s = impl_->server;
    s.Get(R"(/api/.*)", handler);
    s.Post(R"(/api/.*)", handler);
    s.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
    s.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                           {"Access-Control-Allow-Headers", "Content-Type"},
                           {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
    auto& s = impl_->server;
    const int bound = port == 0 ? s.bind_to_any_port(host) : (s.bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw Error(ErrorCode::io_error, "cannot bind " + host + ":" + std::to_string(port));
    return bound;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
    if (impl_) impl_->server.stop();
}

}  // namespace fibredist
